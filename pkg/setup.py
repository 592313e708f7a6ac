from setuptools import setup, find_packages

setup(
    name="cgcnn",
    version="1.0",
    packages=find_packages(exclude=["tests", "examples", "examples.*"]),
    install_requires=[
        "numpy",
        "Pillow",
        "pandas",
        "scikit-learn",
        "pydantic==1.10.22",
        "click==8.2.1",
        "python-dotenv",
    ],
    entry_points={
        "console_scripts": ["cgcnn=Commands.cli:cli"],
    },
)
