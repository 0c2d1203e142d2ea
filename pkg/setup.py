from setuptools import setup, find_packages

setup(
    name='shapley-credit',
    version='0.0.1',
    packages=find_packages(include=["src", "src.*"]),
    package_data={
        "src.trainer": ["hyperparameters.json"],
        "src.csv_schemas": ["csv_schemas.json"],
        "src.cli": ["presets/*.cfg"],
    },
    install_requires=[
        "numpy",
        "scipy",
        "pandas",
        "loguru",
        "tqdm",
    ],
    entry_points={
        "console_scripts": ["shapley-credit = src.cli.main:main"],
    },
    )
