"""k-anonymized releases with per-recipient decoy records, collusion hardening and leak attribution."""

from decoyanon.anonymizer import (AnonymizedView, EquivalenceClass, build_view, check_k,
                                  compute_classes, loss_metrics, ola_search)
from decoyanon.attribution import Verdict, attribute, scan_records
from decoyanon.collusion import (close_to_k_census, collude, risk_outlier_screen,
                                 size_histogram)
from decoyanon.dataset import (AttributeSchema, Dataset, Table, load_dataset, load_schema,
                               sample_uniform, strip_direct)
from decoyanon.decoys import (DecoyPolicy, DecoyRegistry, HardeningPolicy, RecipientRelease,
                              decoy_guess_probability, harden, make_releases,
                              materialize_decoys, same_origin, select_decoys)
from decoyanon.hierarchy import (GeneralizationHierarchy, IntervalHierarchy, MappingHierarchy,
                                 SuffixMaskHierarchy, load_hierarchies)
from decoyanon.linkage import (DecoyCandidate, LinkageReport, discover_candidates,
                               link_classes, risk_profile)

__version__ = "0.1.0"
