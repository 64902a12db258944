from setuptools import setup, find_packages

setup(
    name="sas-parity",
    version="1.0.0",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    install_requires=[
        "fastapi>=0.104.1",
        "uvicorn>=0.24.0",
        "python-dotenv>=1.0.0",
        "pydantic>=2.4.2,<3.0.0",
        "networkx>=3.2",
    ],
    extras_require={
        "test": [
            "pytest>=7.4.0",
            "httpx>=0.25.1",
        ],
    },
    entry_points={
        "console_scripts": [
            "sas-parity=cli:main",
        ],
    },
    python_requires=">=3.10",
)
