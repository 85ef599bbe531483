# -*- mode: python; tab-width:8; py-indent-offset:4; indent-tabs-mode:nil -*-

"""
Contactinterval fits semiparametric relative risk regression models to infectious disease transmission data on the contact interval time scale.

Sample use cases:

* Who-infected-whom is observed: fit the partial likelihood for the coefficients and the Breslow estimate of the baseline;
* Who-infected-whom is not observed: fit the same model with an ECM algorithm that weights each possible infector;
* Simulate epidemics on a small-world network and check the coverage of both methods' confidence intervals.

Everything is available from the ``contact-interval`` command or from the modules of this package.
"""

__version__ = "0.3.0"
