"""Communication cost of distributed storage in a wireless cell with periodic repair."""

from .model import (
    CodeFamily,
    NetworkParams,
    StorageCode,
    ValidationReport,
    make_mbr,
    make_mds,
    make_msr,
    make_replication,
    reference_codes,
    reference_network,
    validate,
)
from .analytic import CostBreakdown, NumericalInstabilityError, total_cost

__version__ = "0.1.0"
