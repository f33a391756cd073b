import codecs

from setuptools import find_packages, setup

DISTNAME = 'COGLOAD'
DESCRIPTION = 'Closed-loop cognitive load estimation and adaptive training from EEG and task events.'
with codecs.open('README.rst') as f:
    LONG_DESCRIPTION = f.read()
LICENSE = 'new BSD'
VERSION = '0.1.0'
INSTALL_REQUIRES = ['numpy', 'scipy', 'scikit-learn']
CLASSIFIERS = ['Intended Audience :: Science/Research',
               'Intended Audience :: Developers',
               'License :: OSI Approved',
               'Programming Language :: Python',
               'Topic :: Software Development',
               'Topic :: Scientific/Engineering',
               'Operating System :: POSIX',
               'Operating System :: Unix',
               'Operating System :: MacOS',
               'Programming Language :: Python :: 3.8',
               'Programming Language :: Python :: 3.9',
               'Programming Language :: Python :: 3.10']
EXTRAS_REQUIRE = {
    'tests': [
        'pytest',
        'pytest-cov'],
    'docs': [
        'sphinx',
        'sphinx_rtd_theme',
        'numpydoc'
    ]
}

setup(name=DISTNAME,
      description=DESCRIPTION,
      license=LICENSE,
      version=VERSION,
      long_description=LONG_DESCRIPTION,
      zip_safe=False,
      classifiers=CLASSIFIERS,
      packages=find_packages(exclude=['test', 'test.*', 'examples', 'examples.*']),
      python_requires='>=3.8',
      install_requires=INSTALL_REQUIRES,
      extras_require=EXTRAS_REQUIRE,
      entry_points={'console_scripts': ['cogload = COGLOAD.cli.main:main']})
