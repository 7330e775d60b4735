"""Learning zone-order constraints from historical routes."""

from .hierarchy import (
    driver_order_constraints,
    select_hierarchy_symbols,
    sorted_cluster_constraints,
    super_cluster_path_constraints,
)
from .model import VARIANTS, build_driver_order_model, build_model, prepare_training
from .paths import (
    NoReferenceRoute,
    Target,
    component_path,
    precedence_constraints,
    select_reference_route,
)
from .routes import (
    QUALITY_WEIGHTS,
    TrainingRoute,
    fill_missing_zone_ids,
    load_training,
    parse_route_text,
    read_route,
    route_from_json,
    route_to_json,
    write_route,
)
