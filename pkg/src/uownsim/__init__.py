"""Simulation toolkit for multihop underwater optical wireless networks.

Subpackage map:

- ``channel``: water attenuation and line-of-sight channel gain
- ``link_budget``: received power, photon counts, error and rate models
- ``pointing``: divergence-angle selection under location uncertainty
- ``relay_df``: decode-and-forward chains and their power allocation
- ``relay_af``: all-optical amplify-and-forward chains
- ``routing``: centralized route construction over feasibility graphs
- ``lipar``: distributed, location-driven next-hop selection
- ``harness``: Monte Carlo campaigns over random deployments
- ``config``/``cli``/``plots``: file-driven runs and figure export
"""

__version__ = "0.1.0"
