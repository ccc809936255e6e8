#!/usr/bin/env python

from setuptools import setup

setup(name='pmmtwin',
      version='0.1',
      description='Digital twin of a flux-DAC programmed superconducting '
                  'annealing processor',
      author='Daniel Marquina',
      author_email='damarquinap7@gmail.com',
      packages=['pmmtwin'],
      python_requires='>=3.7',
      install_requires=['numpy>=1.17', 'scipy>=1.4', 'networkx>=2.3'],
      extras_require={'test': ['pytest'],
                      'docs': ['sphinx', 'sphinx_rtd_theme',
                               'sphinxcontrib-napoleon']},
      entry_points={'console_scripts': ['pmm = pmmtwin.cli:main']}
      )
