import os
from setuptools import Command, find_packages, setup

PROJECT_NAME = "espnet"


class CleanCommand(Command):
    user_options = []  # type: ignore

    def initialize_options(self):
        pass

    def finalize_options(self):
        pass

    def run(self):
        os.system('rm -vrf ./build ./dist ./*.pyc ./*.tgz ./*.egg-info')


cmdclass = {'clean': CleanCommand}

with open('requirements.txt') as f:
    install_requires = [line.strip() for line in f if line.strip()]

setup(
    name=PROJECT_NAME,
    packages=find_packages('src'),
    provides=[PROJECT_NAME],
    license='MIT',
    package_dir={'': 'src'},
    package_data={PROJECT_NAME: ['config/*.yaml', 'plotting/palettes/*.yaml']},
    version="0.1.0",
    cmdclass=cmdclass,
    install_requires=install_requires,
    extras_require={'test': ['pytest', 'hypothesis']},
    entry_points={'console_scripts': ['espnet = espnet.cli:main']},
    description=(
        "Controller-managed ESP tunnels over a match-action switch pipeline, "
        "with a deterministic network simulator."
    ),
    long_description=(
        "Packet codec, cipher suites, switch pipeline, IKE-less controller, "
        "roadwarrior agent and a scenario-driven simulator."
    ),
    python_requires=">=3.10",
)
