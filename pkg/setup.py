# -*- coding: utf-8 -*-
"""
Packaging script of cadstream, correlated anomaly detection on windowed data
streams.
"""
from setuptools import setup, find_packages

with open("README.md", 'r') as readme:
    long_desc = readme.read()

setup(
    name='cadstream',
    version='1.0.0',
    description='Detects groups of correlated anomalies in windowed data streams',
    long_description=long_desc,
    long_description_content_type='text/markdown',
    author='cadstream developers',
    license='MIT',
    classifiers=[
        'License :: OSI Approved :: MIT License',
        'Topic :: Scientific/Engineering :: Information Analysis',
        'Topic :: System :: Monitoring',
        'Operating System :: POSIX :: Linux',
        'Environment :: Console',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11'
    ],
    python_requires='>=3.8',
    install_requires=[
        'numpy>=1.20',
        'scipy>=1.6',
        'numba>=0.53'
    ],
    test_suite='cadstream.tests',
    packages=find_packages(exclude=['tests']),
    include_package_data=True,
    package_data={
        'cadstream' : ['share/cadstream.example.conf']
    },
    entry_points={
        'console_scripts': ['cadstream=cadstream.main.main:main']
    }
)
