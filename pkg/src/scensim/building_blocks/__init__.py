from .behaviours import Behaviour, ObservedView, SimpleFollowRouteBehaviour, execute_behaviour
from .instances import (
    ObjectView,
    SimulationAttribute,
    SimulationObjectInstance,
    attribute_uuid,
    instantiate,
    new_instance,
    object_uuid,
)
from .kinematics import METERS_PER_DEG_LAT, advance_along_route, meters_per_deg_lon
from .registry import (
    AttributeDecl,
    BehaviourDescriptor,
    ClassDescriptor,
    TypeRegistry,
    builtin_registry,
    lineage,
)

__all__ = [
    "AttributeDecl",
    "Behaviour",
    "BehaviourDescriptor",
    "ClassDescriptor",
    "METERS_PER_DEG_LAT",
    "ObjectView",
    "ObservedView",
    "SimpleFollowRouteBehaviour",
    "SimulationAttribute",
    "SimulationObjectInstance",
    "TypeRegistry",
    "advance_along_route",
    "attribute_uuid",
    "builtin_registry",
    "execute_behaviour",
    "instantiate",
    "lineage",
    "meters_per_deg_lon",
    "new_instance",
    "object_uuid",
]
