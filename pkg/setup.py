from setuptools import setup, find_packages

setup(
    name="ctxcat",
    version="0.1.0",
    description="Context-token category discovery: learn per-context tokens on a frozen encoder, cluster and name known and novel classes",
    long_description=open("README.md", encoding="utf-8").read(),
    long_description_content_type="text/markdown",
    license="MIT",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    package_data={"ctxcat.prompts": ["*.txt"]},
    python_requires=">=3.9",
    install_requires=[
        "pyyaml>=6.0",
        "python-dotenv>=0.21.0",
        "click>=8.1.0",
        "pydantic>=2.0",
        "tabulate>=0.9.0",
        "colorama>=0.4.6",
        "numpy>=1.24",
        "scipy>=1.10",
        "scikit-learn>=1.2",
        "torch>=2.0",
        "Pillow>=9.5",
    ],
    extras_require={
        "dev": [
            "pytest>=7.0",
            "pytest-cov>=4.0",
            "black>=23.0",
            "flake8>=5.0",
        ]
    },
    entry_points={
        "console_scripts": [
            "ctxcat=ctxcat_cli:cli",
        ]
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
    ],
)
