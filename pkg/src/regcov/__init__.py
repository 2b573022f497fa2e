"""Measure how well a benchmark corpus covers the Code of Practice taxonomy.

Subpackages and modules:

* ``taxonomy``: capability/propensity codes and the systemic-risk map
* ``corpus``: adapters that normalize raw benchmark files into question records
* ``sampler``: stratified allocation and seeded drawing of a gold sample
* ``judge``: prompt building, reply parsing and the batched judge runner
* ``validation``: gold annotations, consensus, micro metrics and kappa
* ``analysis``: coverage matrices, tiers and systemic-risk coverage
"""

from .taxonomy import CategoryCode, Kind, SystemicRisk, parse_code

__version__ = "0.1.0"

__all__ = ["CategoryCode", "Kind", "SystemicRisk", "parse_code", "__version__"]
