from setuptools import setup, find_packages

with open('README.rst') as f:
    readme = f.read()

setup(
    name='gwlaw',
    version='v0.1.0',
    license='MIT',
    description='Monte Carlo laboratory for local laws of generalized Wigner matrices '
                'with imprimitive variance profiles',
    keywords=['random matrices', 'local semicircle law', 'Marchenko-Pastur',
              'variance profile', 'resolvent'],
    long_description=readme,
    long_description_content_type='text/x-rst',
    install_requires=[
        'numpy>=1.20.0',
        'scipy>=1.7.0',
        'pandas>=1.2.0'
    ],
    entry_points={
        'console_scripts': ['gwlaw=gwlaw.cli:main']
    },
    packages=find_packages(exclude=('tests', 'docs')),
    python_requires='>=3.8'
)
