"""Five-layer cognitive evaluation structures and mechanical conflict analysis.

A structure links a product's usage scenes to the experience they create:

    Scene -> DesignElement -> PerceivedFeature --(positive/negative)--> DelightFactor -> DelightfulExperience

Conflict detection finds delight factors that are pushed in opposite
directions by different perceived features, or pushed down only by features
whose physical cause cannot be changed. Opportunity generation then proposes
which sensory channel could be manipulated instead, exploiting an interaction
between two modalities.

All functions here are pure; structures are immutable once built.
"""

from __future__ import annotations

import json
import shlex
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from pathlib import Path


class Layer(str, Enum):
    SCENE = "scene"
    DESIGN_ELEMENT = "element"
    PERCEIVED_FEATURE = "feature"
    DELIGHT_FACTOR = "factor"
    DELIGHTFUL_EXPERIENCE = "experience"


class Modality(str, Enum):
    VISION = "Vision"
    AUDITION = "Audition"
    TOUCH = "Touch"


class Valence(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    STRUCTURAL = "structural"


# Structural edges climb exactly one layer; features connect to factors only
# through valenced edges, so (feature, factor) is deliberately absent here.
_STRUCTURAL_STEPS = {
    (Layer.SCENE, Layer.DESIGN_ELEMENT),
    (Layer.DESIGN_ELEMENT, Layer.PERCEIVED_FEATURE),
    (Layer.DELIGHT_FACTOR, Layer.DELIGHTFUL_EXPERIENCE),
}


@dataclass(frozen=True)
class Node:
    """One labeled node of the structure.

    ``modality`` is meaningful on scenes and perceived features.
    ``design_limit`` notes that the physical property behind this node is
    fixed (material, mechanism, brand identity) and cannot be redesigned.
    """

    id: str
    layer: Layer
    label: str
    modality: frozenset[Modality] | None = None
    design_limit: str | None = None


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    valence: Valence


@dataclass(frozen=True)
class CognitiveStructure:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    scene_order: tuple[str, ...]

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)


@dataclass(frozen=True)
class Conflict:
    """A delight factor that cannot be improved directly.

    Either opposing valences meet at the factor, or every improvement path
    is blocked by a design limit. ``limited`` lists the involved features
    whose ancestry (scene, element, or the feature itself) carries a limit.
    """

    delight_factor: str
    positive_features: tuple[str, ...]
    negative_features: tuple[str, ...]
    limited: tuple[str, ...]


@dataclass(frozen=True)
class CrossModalOpportunity:
    conflict: Conflict
    modality_pair: frozenset[Modality]
    candidate_manipulated_modality: Modality
    rationale: str


class StructureParseError(ValueError):
    """Raised on malformed structure files; message carries source:line."""


def _by_id(structure: CognitiveStructure) -> dict[str, Node]:
    out: dict[str, Node] = {}
    for n in structure.nodes:
        out.setdefault(n.id, n)
    return out


def validate(structure: CognitiveStructure) -> list[str]:
    """Check every structural invariant; return one message per violation.

    An empty list means the structure is well formed. Violations are data,
    not exceptions: each message names the offending node or edge.
    """
    violations: list[str] = []
    seen: set[str] = set()
    for n in structure.nodes:
        if n.id in seen:
            violations.append(f"duplicate node id '{n.id}'")
        seen.add(n.id)
        if n.modality is not None and len(n.modality) == 0:
            violations.append(f"node '{n.id}' declares an empty modality set")

    nodes = _by_id(structure)
    for e in structure.edges:
        tag = f"edge {e.src} -> {e.dst} ({e.valence.value})"
        if e.src not in nodes or e.dst not in nodes:
            missing = e.src if e.src not in nodes else e.dst
            violations.append(f"{tag}: endpoint '{missing}' is not a node")
            continue
        src, dst = nodes[e.src], nodes[e.dst]
        if e.valence is Valence.STRUCTURAL:
            if (src.layer, dst.layer) not in _STRUCTURAL_STEPS:
                violations.append(
                    f"{tag}: structural edges may only connect "
                    f"scene->element, element->feature or factor->experience; "
                    f"got {src.layer.value}->{dst.layer.value}"
                )
        else:
            if src.layer is not Layer.PERCEIVED_FEATURE or dst.layer is not Layer.DELIGHT_FACTOR:
                violations.append(
                    f"{tag}: valenced edges connect feature->factor only; "
                    f"got {src.layer.value}->{dst.layer.value}"
                )

    experiences = [n for n in structure.nodes if n.layer is Layer.DELIGHTFUL_EXPERIENCE]
    if len(experiences) != 1:
        violations.append(
            f"expected exactly one experience node, found {len(experiences)}"
        )

    scene_ids = {n.id for n in structure.nodes if n.layer is Layer.SCENE}
    order = list(structure.scene_order)
    for sid in order:
        if sid not in scene_ids:
            violations.append(f"scene_order entry '{sid}' is not a scene node")
    for sid in sorted(scene_ids):
        count = order.count(sid)
        if count != 1:
            violations.append(
                f"scene '{sid}' appears {count} times in scene_order, expected once"
            )

    # Elements and features must hang off some scene through structural edges.
    reachable = set(scene_ids)
    frontier = set(scene_ids)
    structural = [e for e in structure.edges if e.valence is Valence.STRUCTURAL]
    while frontier:
        frontier = {
            e.dst for e in structural if e.src in frontier and e.dst not in reachable
        }
        reachable |= frontier
    for n in structure.nodes:
        if n.layer in (Layer.DESIGN_ELEMENT, Layer.PERCEIVED_FEATURE) and n.id not in reachable:
            violations.append(
                f"{n.layer.value} '{n.id}' is not reachable from any scene"
            )
        if n.layer is Layer.DELIGHT_FACTOR:
            if not any(
                e.src == n.id and e.valence is Valence.STRUCTURAL and e.dst in nodes
                and nodes[e.dst].layer is Layer.DELIGHTFUL_EXPERIENCE
                for e in structure.edges
            ):
                violations.append(
                    f"factor '{n.id}' has no structural edge to the experience node"
                )
    return violations


def _feature_ancestry(structure: CognitiveStructure) -> dict[str, tuple[set[str], bool]]:
    """Map each feature id to (ancestor scene ids, ancestry carries a limit).

    Ancestry covers every node on a structural path from a scene to the
    feature, the feature itself included; a limit anywhere on any such path
    marks the feature as design-limited.
    """
    nodes = _by_id(structure)
    structural = [e for e in structure.edges if e.valence is Valence.STRUCTURAL]
    element_scenes: dict[str, set[str]] = {}
    element_limited: dict[str, bool] = {}
    for e in structural:
        src, dst = nodes.get(e.src), nodes.get(e.dst)
        if src is None or dst is None:
            continue
        if src.layer is Layer.SCENE and dst.layer is Layer.DESIGN_ELEMENT:
            element_scenes.setdefault(dst.id, set()).add(src.id)
            limited = bool(src.design_limit) or bool(dst.design_limit)
            element_limited[dst.id] = element_limited.get(dst.id, False) or limited

    out: dict[str, tuple[set[str], bool]] = {}
    for e in structural:
        src, dst = nodes.get(e.src), nodes.get(e.dst)
        if src is None or dst is None:
            continue
        if src.layer is Layer.DESIGN_ELEMENT and dst.layer is Layer.PERCEIVED_FEATURE:
            scenes, limited = out.get(dst.id, (set(), False))
            scenes |= element_scenes.get(src.id, set())
            limited = limited or element_limited.get(src.id, bool(src.design_limit))
            out[dst.id] = (scenes, limited or bool(dst.design_limit))
    for n in structure.nodes:
        if n.layer is Layer.PERCEIVED_FEATURE and n.id not in out:
            out[n.id] = (set(), bool(n.design_limit))
    return out


def find_conflicts(
    structure: CognitiveStructure, scene: str | None = None
) -> list[Conflict]:
    """Find every delight factor caught in a design conflict.

    A factor conflicts when it receives both positive and negative edges,
    or when it receives only negative edges and at least one of those
    features is design-limited (so the direct fix is unavailable). With a
    scene filter, only features belonging to that scene are considered.
    The caller is expected to have validated the structure.
    """
    nodes = _by_id(structure)
    if scene is not None:
        if scene not in nodes or nodes[scene].layer is not Layer.SCENE:
            raise ValueError(f"unknown scene id: {scene!r}")
    ancestry = _feature_ancestry(structure)

    incoming: dict[str, dict[Valence, set[str]]] = {}
    for e in structure.edges:
        if e.valence is Valence.STRUCTURAL:
            continue
        if scene is not None and scene not in ancestry.get(e.src, (set(), False))[0]:
            continue
        incoming.setdefault(e.dst, {Valence.POSITIVE: set(), Valence.NEGATIVE: set()})
        incoming[e.dst][e.valence].add(e.src)

    conflicts: list[Conflict] = []
    for factor_id in sorted(incoming):
        pos = sorted(incoming[factor_id][Valence.POSITIVE])
        neg = sorted(incoming[factor_id][Valence.NEGATIVE])
        limited = tuple(
            f for f in sorted(set(pos) | set(neg)) if ancestry.get(f, (set(), False))[1]
        )
        opposed = bool(pos) and bool(neg)
        blocked = not pos and bool(neg) and any(f in limited for f in neg)
        if opposed or blocked:
            conflicts.append(
                Conflict(
                    delight_factor=factor_id,
                    positive_features=tuple(pos),
                    negative_features=tuple(neg),
                    limited=limited,
                )
            )
    return conflicts


def find_opportunities(
    structure: CognitiveStructure, conflicts: list[Conflict]
) -> list[CrossModalOpportunity]:
    """Propose cross-modal levers for the given conflicts.

    For each unordered pair of modalities tagged on a conflict's features,
    one opportunity is emitted provided at least one side is free of design
    limits; the manipulation candidate is picked among the unlimited
    modalities. Single-modality conflicts yield nothing. Outputs are
    advisory and carry a rationale for human review.
    """
    nodes = _by_id(structure)
    ancestry = _feature_ancestry(structure)
    opportunities: list[CrossModalOpportunity] = []
    for conflict in conflicts:
        features = sorted(set(conflict.positive_features) | set(conflict.negative_features))
        tag_limits: dict[Modality, bool] = {}
        for fid in features:
            node = nodes.get(fid)
            if node is None or not node.modality:
                continue
            limited = ancestry.get(fid, (set(), False))[1]
            for m in node.modality:
                # A modality stays usable while any feature carrying it is free.
                tag_limits[m] = tag_limits.get(m, True) and limited
        tags = sorted(tag_limits, key=lambda m: m.value)
        for m1, m2 in combinations(tags, 2):
            unlimited = [m for m in (m1, m2) if not tag_limits[m]]
            if not unlimited:
                continue
            manipulated = min(unlimited, key=lambda m: m.value)
            opportunities.append(
                CrossModalOpportunity(
                    conflict=conflict,
                    modality_pair=frozenset({m1, m2}),
                    candidate_manipulated_modality=manipulated,
                    rationale=_rationale(nodes, conflict, m1, m2, manipulated),
                )
            )
    return opportunities


def _rationale(
    nodes: dict[str, Node],
    conflict: Conflict,
    m1: Modality,
    m2: Modality,
    manipulated: Modality,
) -> str:
    factor = nodes.get(conflict.delight_factor)
    factor_label = factor.label if factor else conflict.delight_factor
    limited_labels = [
        nodes[f].label if f in nodes else f for f in conflict.limited
    ]
    parts = [
        f"'{factor_label}' sits on a {m1.value}/{m2.value} interaction;"
    ]
    if limited_labels:
        parts.append(
            "the blocked side (" + ", ".join(limited_labels) + ") cannot be redesigned directly,"
        )
        parts.append(
            f"so manipulating the {manipulated.value} channel may shift the combined percept instead."
        )
    else:
        parts.append(
            f"manipulating the {manipulated.value} channel may rebalance the opposing features at the perceptual level."
        )
    return " ".join(parts)


# ---------------------------------------------------------------------------
# Structure file format
#
# Line-oriented, three sections. Labels are double-quoted; '#' starts a
# comment. Example:
#
#   [nodes]
#   shoot  scene    "Shoot (press the shutter)"  modality=Audition,Touch
#   sound  element  "Shutter sound"              limit="fixed by the mechanism"
#   [edges]
#   shoot -> sound  structural
#   [scene_order]
#   look hold focus shoot
# ---------------------------------------------------------------------------

_LAYER_SPELLINGS = {
    "scene": Layer.SCENE,
    "element": Layer.DESIGN_ELEMENT,
    "design_element": Layer.DESIGN_ELEMENT,
    "feature": Layer.PERCEIVED_FEATURE,
    "perceived_feature": Layer.PERCEIVED_FEATURE,
    "factor": Layer.DELIGHT_FACTOR,
    "delight_factor": Layer.DELIGHT_FACTOR,
    "experience": Layer.DELIGHTFUL_EXPERIENCE,
    "delightful_experience": Layer.DELIGHTFUL_EXPERIENCE,
}

_VALENCE_SPELLINGS = {
    "structural": Valence.STRUCTURAL,
    "positive": Valence.POSITIVE,
    "negative": Valence.NEGATIVE,
}


def parse_structure(text: str, source: str = "<string>") -> CognitiveStructure:
    """Parse the declarative structure format into a CognitiveStructure."""
    nodes: list[Node] = []
    edges: list[Edge] = []
    scene_order: list[str] = []
    section: str | None = None

    def fail(lineno: int, msg: str) -> StructureParseError:
        return StructureParseError(f"{source}:{lineno}: {msg}")

    for lineno, raw in enumerate(text.splitlines(), start=1):
        try:
            tokens = shlex.split(raw, comments=True)
        except ValueError as exc:
            raise fail(lineno, f"unbalanced quoting ({exc})") from exc
        if not tokens:
            continue
        if len(tokens) == 1 and tokens[0].startswith("[") and tokens[0].endswith("]"):
            section = tokens[0][1:-1].strip().lower()
            if section not in ("nodes", "edges", "scene_order"):
                raise fail(lineno, f"unknown section [{section}]")
            continue
        if section is None:
            raise fail(lineno, "content before any [section] header")
        if section == "nodes":
            nodes.append(_parse_node(tokens, lineno, fail))
        elif section == "edges":
            edges.append(_parse_edge(tokens, lineno, fail))
        else:
            scene_order.extend(tokens)

    return CognitiveStructure(tuple(nodes), tuple(edges), tuple(scene_order))


def _parse_node(tokens: list[str], lineno: int, fail) -> Node:
    if len(tokens) < 3:
        raise fail(lineno, "node lines need: id layer \"label\" [key=value ...]")
    node_id, layer_word, label = tokens[0], tokens[1].lower(), tokens[2]
    if layer_word not in _LAYER_SPELLINGS:
        raise fail(lineno, f"unknown layer '{tokens[1]}'")
    modality: frozenset[Modality] | None = None
    limit: str | None = None
    for token in tokens[3:]:
        key, sep, value = token.partition("=")
        if not sep:
            raise fail(lineno, f"expected key=value, got '{token}'")
        if key == "modality":
            names = [v for v in value.split(",") if v]
            try:
                modality = frozenset(Modality(v.capitalize()) for v in names)
            except ValueError:
                raise fail(lineno, f"unknown modality in '{value}'")
        elif key == "limit":
            limit = value
        else:
            raise fail(lineno, f"unknown node attribute '{key}'")
    return Node(node_id, _LAYER_SPELLINGS[layer_word], label, modality, limit)


def _parse_edge(tokens: list[str], lineno: int, fail) -> Edge:
    if len(tokens) != 4 or tokens[1] != "->":
        raise fail(lineno, "edge lines need: src -> dst valence")
    valence_word = tokens[3].lower()
    if valence_word not in _VALENCE_SPELLINGS:
        raise fail(lineno, f"unknown valence '{tokens[3]}'")
    return Edge(tokens[0], tokens[2], _VALENCE_SPELLINGS[valence_word])


def load_structure(path: str | Path) -> CognitiveStructure:
    p = Path(path)
    return parse_structure(p.read_text(encoding="utf-8"), source=str(p))


def format_structure(structure: CognitiveStructure) -> str:
    """Serialize back to the declarative text format."""
    lines = ["[nodes]"]
    for n in structure.nodes:
        parts = [n.id, n.layer.value, json.dumps(n.label)]
        if n.modality is not None:
            parts.append("modality=" + ",".join(sorted(m.value for m in n.modality)))
        if n.design_limit is not None:
            parts.append("limit=" + json.dumps(n.design_limit))
        lines.append("  ".join(parts))
    lines.append("")
    lines.append("[edges]")
    for e in structure.edges:
        lines.append(f"{e.src} -> {e.dst}  {e.valence.value}")
    lines.append("")
    lines.append("[scene_order]")
    lines.append(" ".join(structure.scene_order))
    lines.append("")
    return "\n".join(lines)


def to_dot(structure: CognitiveStructure) -> str:
    """Render as Graphviz DOT: dashed edges for negative effects, ranks per layer."""
    lines = [
        "digraph cognitive_structure {",
        "  rankdir=BT;",
        '  node [shape=box, fontname="Helvetica"];',
    ]
    for layer in Layer:
        ids = [n.id for n in structure.nodes if n.layer is layer]
        if ids:
            lines.append("  { rank=same; " + " ".join(f'"{i}";' for i in ids) + " }")
    for n in structure.nodes:
        attrs = [f'label="{n.label}"']
        if n.design_limit:
            attrs.append("peripheries=2")
        lines.append(f'  "{n.id}" [{", ".join(attrs)}];')
    for e in structure.edges:
        style = {
            Valence.NEGATIVE: "dashed",
            Valence.POSITIVE: "solid",
            Valence.STRUCTURAL: "dotted",
        }[e.valence]
        lines.append(f'  "{e.src}" -> "{e.dst}" [style={style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def fixture_path() -> Path:
    """Path of the bundled SLR camera structure file."""
    return Path(__file__).resolve().parent / "fixtures" / "slr_camera.structure"


def load_fixture() -> CognitiveStructure:
    return load_structure(fixture_path())
