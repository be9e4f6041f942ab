#!/usr/bin/python3

import os
import shutil

from setuptools import find_packages, setup
from setuptools.command.develop import develop
from setuptools.command.install import install

with open("README.md", "r") as f:
    readme = f.read()


def install_completion():
    if os.access("/etc/bash_completion.d", os.W_OK):
        shutil.copyfile("extrafiles/completion.sh", "/etc/bash_completion.d/kerncoint")
    else:
        print(
            "Insufficient permissions to install the bash completion script to"
            " /etc/bash_completion.d"
        )


class CompletionDevelop(develop):
    def run(self):
        install_completion()
        develop.run(self)


class CompletionInstall(install):
    def run(self):
        install_completion()
        install.run(self)


setup(
    name="kerncoint",
    version="0.1.0",
    packages=find_packages(exclude=["tests"]),
    package_data={"kerncoint": ["schema.yml"]},
    python_requires=">=3.9",
    install_requires=[
        "colorama>=0.4.6",
        "jsonschema",
        "pyyaml",
        "numpy",
        "scipy",
        "pandas",
    ],
    extras_require={
        "test": [
            "pytest",
            "hypothesis",
            "black",
            "flake8",
            "pep8-naming",
            "flake8-isort",
        ]
    },
    cmdclass={
        "develop": CompletionDevelop,
        "install": CompletionInstall,
    },
    entry_points={
        "console_scripts": [
            "kerncoint = kerncoint:main",
        ]
    },
    # Package metadata.
    license="MIT",
    long_description=readme,
    long_description_content_type="text/markdown",
)
