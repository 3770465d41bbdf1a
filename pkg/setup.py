from setuptools import setup, find_packages

LATEST_VERSION = "0.1.0"

exclude_packages = []

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()
    
with open("requirements.txt", "r") as f:
    reqs = [line.strip() for line in f if line.strip() and not any(pkg in line for pkg in exclude_packages)]

setup(
    name="task-allocator",
    version=LATEST_VERSION,
    description="Decentralized load-aware multi-agent task allocation with belief-state deep Q-learning",
    long_description=long_description,
    long_description_content_type="text/markdown",
    package_dir={'task_allocator': 'task_allocator'},
    packages=find_packages(exclude=["tests", "tests.*"]),
    package_data={'task_allocator': ['scenarios/*.scn']},
    classifiers=[
        "Operating System :: OS Independent",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
    python_requires=">=3.10",
    install_requires=reqs,
    extras_require={
        'dev': [
            'pytest',
        ]
    },
    entry_points={
        'console_scripts': [
            'task-allocator=task_allocator.main:cli_entry',
        ],
    },
)
