import setuptools

VERSION = '0.3.0'

with open("README.md", "r", encoding="utf8") as fh:
    long_description = fh.read()

setuptools.setup(
    name="cvrc",
    version=VERSION,
    description="Complex-valued reservoir computing for InSAR aspect classification and slope estimation",
    long_description=long_description,
    long_description_content_type="text/markdown",
    license='Apache License 2.0',
    keywords=["InSAR", "Reservoir Computing", "Echo State Network", "Complex-valued", "Torch"],
    packages=setuptools.find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    install_requires=[
        'torch>=1.13',
        'numpy',
        'GitPython',
    ],
    extras_require={
        'test': ['pytest'],
    },
    entry_points={
        'console_scripts': ['cvrc=cvrc.cli:main'],
    },
    python_requires='>=3.8',
    classifiers=[
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.8",
        "License :: OSI Approved :: Apache Software License",
        "Operating System :: OS Independent",
    ],
)
