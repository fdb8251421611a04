# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-pruned-render development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

from setuptools import find_packages, setup

setup(
    name="q2-pruned-render",
    version="0.1.0",
    license="BSD-3-Clause",
    packages=find_packages(include=["q2_pruned_render", "q2_pruned_render.*"]),
    author="q2-pruned-render development team",
    description="Volume rendering of clothed bodies with empty ray and "
    "empty interval omission.",
    url="https://github.com/q2-pruned-render/q2-pruned-render",
    install_requires=["numpy", "pandas"],
    entry_points={
        "qiime2.plugins": ["q2-pruned-render=q2_pruned_render.plugin_setup:plugin"],
        "console_scripts": ["pruned-render=q2_pruned_render._cli:main"],
    },
    package_data={
        "q2_pruned_render": [
            "citations.bib",
            "assets/*",
        ],
        "q2_pruned_render.tests": [
            "data/*",
            "data/*/*",
            "data/*/*/*",
        ],
    },
    zip_safe=False,
)
