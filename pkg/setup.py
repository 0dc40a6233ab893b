from setuptools import setup

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="urncut",
    version="0.1.0",
    author="urncut maintainers",
    description="Exact mixing profiles and coupling experiments for the (n,k) Bernoulli-Laplace urn chain.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=["urncut", "urncut.core"],
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires='>=3.9',
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "rich>=13.7.0",
        "tomli>=2.0.1; python_version<'3.11'",
    ],
    extras_require={
        "dev": ["pytest>=7.4", "hypothesis>=6.90"],
    },
    entry_points={
        "console_scripts": [
            "urncut=urncut.cli:main",
        ],
    },
)
