"""Package setup for the Couette Boussinesq-MHD stability lab."""
from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="couette-mhd-lab",
    version="0.1.0",
    description="Spectral stability lab for the 2D Boussinesq-MHD system around Couette flow",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(include=["src", "src.*"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.9",
    install_requires=[
        "numpy",
        "scipy",
        "pydantic",
        "pydantic-settings",
        "python-dotenv"
    ],
    extras_require={
        "dev": [
            "pytest",
            "pytest-asyncio",
            "pytest-mock",
            "pytest-cov"
        ]
    },
    entry_points={"console_scripts": ["spectral-lab=src.harness.cli:main"]},
)
