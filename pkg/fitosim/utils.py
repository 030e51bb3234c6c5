import logging
import time

from Pyro4.errors import CommunicationError, ConnectionClosedError

log = logging.getLogger(__name__)

def is_connected(proxy):
    ''' Check if a Pyro4 proxy can reach its remote object

        :param Pyro4.Proxy proxy:
        :return bool: True if the proxy can talk to the remote object
    '''
    try:
        proxy._pyroBind()
    except (CommunicationError, ConnectionClosedError):
        return False
    else:
        return True

def get_uri(proxy):
    """ Get the URI from a proxy

        :param Pyro4.Proxy proxy:
        :return str URI: E.g. PYRO:simworker@localhost:21000
    """
    return proxy._pyroUri.asString()

def split_uri(uri):
    """ Decompose a URI into its constituents

        :param str URI: The URI to decompose (``PYRO:name@address:port``)
        :return tuple: (name, address, port)
    """
    try:
        name, address, port = uri.replace('@', ':').split(':')[1:]
        return (name, address, int(port))
    except ValueError:
        raise ValueError('Malformed Pyro URI {!r} (expected PYRO:name@address:port)'.format(uri))

def sec2hms(seconds):
    """ Convert seconds to readable hour:minute:sec format

        :param float seconds: Seconds
        :return str: The nicely formatted string
    """
    m, s = divmod(seconds, 60)
    h, m = divmod(m, 60)
    return "%dh:%02dm:%02ds" % (h, m, s)

class LogFun(object):
    """ Function wrapper that times a sweep point and turns its exception into the result,
        so one failed point does not take the whole sweep down

        :ivar function _fun: The function to be wrapped

        .. code-block:: python
            :linenos:

            from fitosim.pool import run_point

            res, t_elapsed = LogFun(run_point)(task)
    """
    def __init__(self, fun):
        self._fun = fun

    def __call__(self, *args, **kwargs):
        """ Forward the call to the wrapped function

            :returns tuple: (result of function call or the exception it raised, time elapsed)
        """
        tstart = time.time()
        try:
            res = self._fun(*args, **kwargs)
        except Exception as err:
            log.debug('%s failed: %s', getattr(self._fun, '__name__', self._fun), err)
            res = err
        return res, sec2hms(time.time() - tstart)
