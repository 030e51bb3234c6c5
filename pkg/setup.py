from setuptools import setup

__version__ = '1.0.0'
__release__ = '1.0.0'

setup(name='fitosim',
	  version=__version__,
	  description='Discrete-event simulator of forward-in-time-only vs bilateral SmartNIC offload',
	  long_description=open('README.md').read(),
	  long_description_content_type='text/markdown',
	  license='Apache License, Version 2.0',
	  url='',
	  packages=['fitosim', 'fitosim.testing'],	# Path is relative to the setup.py location
	  package_data={'fitosim': ['presets/*.yaml']},
	  python_requires='>=3.8',
	  install_requires=[
		'Pyro4>=4.59',
		'serpent>=1.19',
		'numpy>=1.22',
		'PyYAML>=5.1',
		'pydantic>=2.0',
	  ],
	  extras_require={
		'tests': ['pytest>=6.0'],
		'docs': ['sphinx', 'sphinx_bootstrap_theme', 'sphinxcontrib-fulltoc'],
	  },
	  entry_points={
		'console_scripts': ['fitosim=fitosim.cli:main'],
	  },
	)
