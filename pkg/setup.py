from setuptools import find_packages, setup

from msdiffeo import __version__

setup(
    name="msdiffeo",
    version=__version__,
    description="Multi-scale diffeomorphic registration with kernel mixtures and semidirect products",
    packages=find_packages(exclude=("tests", "tests.*")),
    python_requires=">=3.9",
    install_requires=["numpy>=1.24.0", "scipy>=1.12.0", "Pillow>=10.0.0"],
    extras_require={"test": ["pytest>=7.4.0", "sympy>=1.12"]},
    entry_points={"console_scripts": ["msdiffeo=msdiffeo.commands:main"]},
)
