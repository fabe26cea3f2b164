"""
Desk-scale example groups
Every preset is built exactly from integer data, so acceptance runs need
no input files. SL2(Z)-type presets act on binary quadratic forms
(A, B, C) through the symmetric square, preserving 4AC - B^2; the point
(1, 0, 4) sits over 2i in the upper half-plane.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

from .coxeter import build_rep
from .discrete_groups import GeneratedGroup
from .errors import ConfigError
from .forms import FormIsometry, QuadraticForm
from .isometries import DISCRIMINANT_GRAM, sym_square

LOGGER = logging.getLogger(__name__)

S = ((0, -1), (1, 0))
T = ((1, 1), (0, 1))
CAT_MAP = ((2, 1), (1, 1))


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    build: Callable[[], GeneratedGroup] = field(repr=False)
    basepoint: Tuple[int, ...]
    aliases: Dict[str, str] = field(default_factory=dict)

    def group(self, **kwargs) -> GeneratedGroup:
        group = self.build()
        if kwargs:
            group = GeneratedGroup(group.form, group.generators, group.cone, name=group.name,
                                   presentation=group.presentation, **kwargs)
        return group

    def translate(self, word):
        """Rewrite named generators ("S", "T") into letter words"""
        if not self.aliases or not word:
            return word
        if all(ch in self.aliases or ch.isspace() for ch in word):
            return "".join(self.aliases.get(ch, "") for ch in word)
        return word


def _binary_group(matrices, name, presentation=None):
    form = QuadraticForm.from_gram(DISCRIMINANT_GRAM, witness=(1, 0, 1))
    generators = [FormIsometry.checked(sym_square(m), form) for m in matrices]
    return GeneratedGroup(form, generators, name=name, presentation=presentation)


def _torsion():
    form = QuadraticForm.diagonal([1, -1, -1, -1])
    cycle = ((1, 0, 0, 0), (0, 0, 0, 1), (0, 1, 0, 0), (0, 0, 1, 0))
    flip = ((1, 0, 0, 0), (0, -1, 0, 0), (0, 0, -1, 0), (0, 0, 0, -1))
    quarter = ((1, 0, 0, 0), (0, 0, -1, 0), (0, 1, 0, 0), (0, 0, 0, 1))
    return GeneratedGroup(form, [FormIsometry.checked(m, form) for m in (cycle, flip, quarter)], name="torsion")


def _pell():
    # x^2 - 2y^2 and its fundamental unit 3 + 2 sqrt(2)
    form = QuadraticForm.diagonal([1, -2])
    return GeneratedGroup(form, [FormIsometry.checked(((3, 4), (2, 3)), form)], name="pell")


def _coxeter(rank):
    return Preset(f"coxeter{rank}", f"universal Coxeter group of rank {rank} on -B, B = 2I - J",
                  lambda: build_rep(rank - 1).group(), (1,) * rank)


PRESETS: Dict[str, Preset] = {
    p.name: p for p in [
        Preset("modular", "PSL2(Z) generated by S and T",
               lambda: _binary_group([S, T], "modular"), (1, 0, 4), {"S": "a", "T": "b"}),
        Preset("free2", "free group on [[5,2],[2,1]] and [[1,2],[2,5]]",
               lambda: _binary_group([((5, 2), (2, 1)), ((1, 2), (2, 5))], "free2", "free"), (1, 0, 1)),
        Preset("cyclic-lox", "infinite cyclic group of the cat map [[2,1],[1,1]]",
               lambda: _binary_group([CAT_MAP], "cyclic-lox", "free"), (1, 0, 1)),
        Preset("transverse-lox", "the cat map and its conjugate by T",
               lambda: _binary_group([CAT_MAP, ((3, -1), (1, 0))], "transverse-lox"), (1, 0, 1)),
        Preset("parabolic-pair", "free group on two unipotents, cusps at infinity and 0",
               lambda: _binary_group([((1, 4), (0, 1)), ((1, 0), (4, 1))], "parabolic-pair", "free"),
               (1, 0, 4)),
        Preset("torsion", "finite group of signed permutations in O(1, 3)", _torsion, (1, 0, 0, 0)),
        Preset("pell", "rank-two lattice x^2 - 2y^2 with its unit group", _pell, (1, 0)),
    ] + [_coxeter(rank) for rank in range(3, 9)]
}


def load_preset(name) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None


def preset_names():
    return sorted(PRESETS)


def round_trip(name) -> Optional[GeneratedGroup]:
    """Group rebuilt from its own JSON serialization"""
    group = load_preset(name).group()
    return GeneratedGroup.from_json(group.to_json(), name=group.name, presentation=group.presentation)
