"""Decentralized stability certification for DC microgrids.

Phase-sector certificates over homotopy-parameterized component admittances,
cross-checked by a centralized eigenmode locus, classical impedance-ratio
criteria, and linear time-domain simulation.
"""

from .certification import (CertComponent, CertificateReport, ComponentSet,
                            SweepGrid, certify, max_alpha, sector_margin,
                            zero_frequency_check)
from .components import (BoostConverterModel, BuckConverterModel, Compensator,
                         CurrentCompensator, LeadLag, LineModel, PI, PIGain,
                         PlantPILoad, SourceModel, VoltageCompensator,
                         boost_admittance, buck_admittance, line_admittance,
                         phase_response)
from .eigenmodes import (LocusTrace, char_poly, eigenmodes, locus,
                         marginal_alpha, max_real_part, spectrum_modes)
from .network import Bus, Edge, NetworkGraph, SteadyState
from .ratfun import (DelayRational, Poly, Rational, combine, evaluate,
                     poly_roots, polymat_det)
from .timesim import (StateSpace, assemble_network, network_modes, realize,
                      settling_time, simulate_step)

__version__ = "0.1.0"
