"""Legacy setuptools entry point; pyproject.toml is the primary build manifest."""
import re
from pathlib import Path

from setuptools import find_packages, setup

HERE = Path(__file__).resolve().parent


def read_version() -> str:
    match = re.search(r'^__version__ = "([^"]+)"', (HERE / "src" / "tica_sim" / "__init__.py").read_text(), re.M)
    if match is None:
        raise RuntimeError("tica_sim.__version__ not found")
    return match.group(1)


def read_requirements() -> list:
    lines = (HERE / "requirements.txt").read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip() and not line.startswith("#")]


setup(
    name="tica-sim",
    version=read_version(),
    description="Trace-driven simulator of a three-level DRAM / RO-SSD / WO-SSD hybrid I/O cache",
    long_description=(HERE / "README.md").read_text(encoding="utf-8"),
    long_description_content_type="text/markdown",
    keywords=["cache", "ssd", "storage", "simulation", "block-trace", "reliability"],
    classifiers=[
        "Programming Language :: Python :: 3.11",
        "Topic :: System :: Hardware",
        "Topic :: Scientific/Engineering",
        "Intended Audience :: Science/Research",
    ],
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    python_requires=">=3.10",
    install_requires=read_requirements(),
    extras_require={"dev": ["pytest>=7.4"]},
    entry_points={"console_scripts": ["tica-sim=tica_sim:main"]},
)
