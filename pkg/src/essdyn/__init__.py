"""Numerical dynamics of transcendental maps with essential singularities."""

from .sphere import INF, as_point, chordal_distance
from .kernel import (MapSpec, Finite, AtInfinity, UndefinedSingular, OverflowedToInfinity, evaluate,
                     derivative, chart_derivative, compose_maps, iterate_map)
from .catalog import get_map, map_labels, UnknownMap
from .singlab import (presingularities, composition_class_count, critical_points,
                      singularities_in_window, Count, CountInfinite, Indeterminate)
from .orbits import iterate_orbit, omega_limit, refine_cycle, classify_cycle
from .escape import (build_cover, SeparatingCover, OverlappingCover, classify_escape, classify_many,
                     classification_report, membership_report, extract_itinerary, eventually_equal,
                     EventualSeq, ItinerarySeq, OUTSIDE)
from .hairs import (trace_hair, singular_orbit, hair_preset, RegionSpec, region_membership,
                    verify_absorbing, verify_translation, Segment)
from .render import RenderConfig, render_plane, probe_point, encode_image

__version__ = "0.1.0"
