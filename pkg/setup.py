from setuptools import setup, find_packages

setup(
    name = "PyDbicc",
    version = "0.1",
    packages = find_packages(exclude = ['tests']),
    
    install_requires = ['numpy>=1.22', 'scipy>=1.7', 'joblib>=1.0'],
    extras_require = {'test': ['pytest>=7.0']},
    entry_points = {'console_scripts': ['dbicc = pydbicc.cli:main']},
    python_requires = '>=3.8',
    
    description = "Distance-based intraclass correlation (dbICC) estimation, bootstrap intervals and reliability simulations",
    keywords = "reliability intraclass correlation bootstrap test-retest connectivity"
    
)
