from walkers.base_walker import BaseWalker
from walkers.compass_walker import CompassWalker
from walkers.walker_types import ModelParams
from walkers.wobbling_walker import WobblingMassWalker

WALKER_KINDS = {
    WobblingMassWalker.kind: WobblingMassWalker,
    CompassWalker.kind: CompassWalker,
}


def create_walker(params: ModelParams, kind: str = WobblingMassWalker.kind) -> BaseWalker:
    """Build the walker model of the given kind ("wobbling" or "compass")."""
    try:
        return WALKER_KINDS[kind](params)
    except KeyError:
        raise ValueError(f"Unknown walker kind: {kind}") from None
