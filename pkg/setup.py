#!/usr/bin/env python

import os
import re

from setuptools import setup

with open(os.path.join(os.path.dirname(__file__), 'contactinterval', '__init__.py')) as v:
    VERSION = re.compile(r'.*__version__ = "(.*?)"', re.S).match(v.read()).group(1)

setup(name="contactinterval",
      version=VERSION,
      description="Relative risk regression for infectious disease transmission on the contact interval scale",
      packages=['contactinterval',],
      license = "MIT License",
      python_requires=">=3.8",
      install_requires=[
        "networkx>=2.5",
        "numpy>=1.20",
        "pandas>=1.3",
        "scipy>=1.6",
        "setproctitle",
        ],
      entry_points={
        "console_scripts": ["contact-interval = contactinterval.cli:main"],
        },
      long_description = """\
Contactinterval fits semiparametric relative risk regression models to infectious disease transmission data.

Sample use cases:

* Who-infected-whom is observed: fit the partial likelihood and the Breslow baseline hazard;
* Who-infected-whom is not observed: fit the same model with an ECM algorithm over the possible infectors;
* Check confidence interval coverage of both methods on simulated small-world epidemics.

Everything is available from the contact-interval command or from the package modules.
""",
      classifiers = [
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: POSIX :: Linux",
        "Topic :: Scientific/Engineering :: Medical Science Apps.",
        ],
      )
