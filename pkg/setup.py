from setuptools import setup, find_packages

setup(
    name="nedlin",
    version="0.1.0",
    packages=find_packages(include=["nedlin*"]),
    install_requires=[
        "pydantic>=2.0.0",
        "numpy>=1.24",
        "scipy>=1.10",
    ],
    extras_require={
        "dev": [
            "pytest>=7.0.0",
            "pytest-asyncio>=0.21.0",
            "pytest-cov>=4.0.0",
            "hypothesis>=6.0",
        ],
    },
    entry_points={"console_scripts": ["nedlin=nedlin.cli.main:main"]},
    python_requires=">=3.10",
)
