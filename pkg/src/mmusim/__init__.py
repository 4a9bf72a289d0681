"""TLB, page-walk and cache hierarchy simulator for address-translation studies."""

from .cachehier import AccessKind, CacheConfig, CacheHierarchy, HierarchyConfig, configure_l4
from .engine import (
    CycleModel,
    EngineConfig,
    InterplayCase,
    MachineConfig,
    NestedConfig,
    Report,
    Simulator,
    l4hit_tlbmiss_per_1k,
    normalized_ipc,
    run,
)
from .errors import (
    ConfigError,
    ConflictingMapping,
    InvalidGeometry,
    InvariantViolation,
    MismatchedRuns,
    MmuSimError,
    PageFault,
    ParseError,
)
from .kernels import BACKEND
from .tlb import TlbConfig, TlbHierarchy, reach
from .vmem import AddressSpace, PageSize, map_page, split_address, translate, walk_path
from .walker import PageWalkCache, PwcConfig, nested_walk, ref_count, walk
from .workload import Access, SynthConfig, SynthGenerator, Switch, read_trace, synth_events

__version__ = "0.1.0"
