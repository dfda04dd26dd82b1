"""Eight-action task vocabulary, single-hand world-state simulation, and plan validation.

The action set covers every change of motion constraint a one-handed
manipulation can impose on an object, so any grasp-manipulation-release
demonstration decomposes into these steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Optional, Sequence

if TYPE_CHECKING:  # pragma: no cover
    from .affordance import AffordanceRecord


class PlanError(Exception):
    """Base class for task-model errors."""


class ActionVocabularyViolation(PlanError):
    """An action name outside the closed eight-action vocabulary."""

    def __init__(self, token: str):
        super().__init__(f"unknown action {token!r}; not in the task vocabulary")
        self.token = token


class InvalidStep(PlanError):
    """A step that breaks arity or argument invariants."""


class UnknownObject(PlanError):
    def __init__(self, name: str):
        super().__init__(f"object {name!r} is not present in the scene")
        self.name = name


class PreconditionViolation(PlanError):
    def __init__(self, reason: str, step_index: Optional[int] = None):
        super().__init__(reason)
        self.reason = reason
        self.step_index = step_index


class InvalidScene(PlanError):
    """A scene description violating uniqueness or relation invariants."""

    def __init__(self, problems: Sequence[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


class InvalidPlanDocument(PlanError):
    def __init__(self, violations: Sequence["Violation"]):
        super().__init__(f"plan has {len(violations)} violation(s)")
        self.violations = list(violations)


class ActionKind(Enum):
    GRAB = "Grab"
    MOVE_HAND = "MoveHand"
    RELEASE = "Release"
    PICK_UP = "PickUp"
    PUT = "Put"
    ROTATE = "Rotate"
    SLIDE = "Slide"
    MOVE_ON_SURFACE = "MoveOnSurface"

    @property
    def arity(self) -> int:
        return 2 if self is ActionKind.PUT else 1

    @classmethod
    def parse(cls, token: str) -> "ActionKind":
        try:
            return cls(token.strip())
        except ValueError:
            raise ActionVocabularyViolation(token) from None


def canonical_name(name: str) -> str:
    """Object identity: case-insensitive comparison after whitespace trimming."""
    return name.strip().casefold()


@dataclass(frozen=True)
class TaskStep:
    action: ActionKind
    args: tuple[str, ...]
    explanation: str = ""
    affordance: Optional["AffordanceRecord"] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) != self.action.arity:
            raise InvalidStep(
                f"{self.action.value} takes {self.action.arity} argument(s), got {len(self.args)}"
            )
        if any(not a.strip() for a in self.args):
            raise InvalidStep(f"{self.action.value} has an empty object name")

    def __str__(self) -> str:
        return f"{self.action.value}({', '.join(self.args)})"


@dataclass(frozen=True)
class SceneObject:
    name: str
    graspable: bool = True


@dataclass(frozen=True)
class SceneDescription:
    """Objects, graspability, and spatial relations of the working area."""

    objects: tuple[SceneObject, ...]
    relations: tuple[tuple[str, str, str], ...] = ()
    rationale: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "relations", tuple(tuple(r) for r in self.relations))
        problems = []
        seen: set[str] = set()
        for obj in self.objects:
            key = canonical_name(obj.name)
            if not key:
                problems.append("empty object name")
            elif key in seen:
                problems.append(f"duplicate object name {obj.name!r}")
            seen.add(key)
        for subject, word, obj in self.relations:
            for endpoint in (subject, obj):
                if canonical_name(endpoint) not in seen:
                    problems.append(f"relation endpoint {endpoint!r} names no listed object")
        if problems:
            raise InvalidScene(problems)

    def object_names(self) -> list[str]:
        return [o.name for o in self.objects]

    def display_name(self, canonical: str) -> str:
        for obj in self.objects:
            if canonical_name(obj.name) == canonical:
                return obj.name
        return canonical


@dataclass(frozen=True)
class WorldState:
    """Simulation state folded over a plan; object names stored canonically."""

    objects: frozenset[str]
    holding: Optional[str] = None
    on_relations: frozenset[tuple[str, str]] = frozenset()
    articulation: tuple[tuple[str, bool], ...] = ()

    def __post_init__(self) -> None:
        if self.holding is not None and self.holding not in self.objects:
            raise InvalidScene([f"held object {self.holding!r} not among scene objects"])

    @classmethod
    def from_scene(cls, scene: SceneDescription) -> "WorldState":
        objects = frozenset(canonical_name(o.name) for o in scene.objects)
        on = frozenset(
            (canonical_name(s), canonical_name(o))
            for s, word, o in scene.relations
            if word.strip().casefold() == "on"
        )
        return cls(objects=objects, on_relations=on)

    def articulation_map(self) -> dict[str, bool]:
        return dict(self.articulation)

    def _toggle(self, name: str) -> "WorldState":
        mapping = self.articulation_map()
        mapping[name] = not mapping.get(name, False)
        return replace(self, articulation=tuple(sorted(mapping.items())))


def apply_step(state: WorldState, step: TaskStep) -> WorldState:
    """Apply one step's postconditions after checking its preconditions.

    Pure: returns a new state, never mutates. Reachability is treated as
    always satisfied since no geometry exists at planning time.
    """
    args = [canonical_name(a) for a in step.args]
    for name in args:
        if name not in state.objects:
            raise UnknownObject(name)
    kind = step.action
    if kind is ActionKind.GRAB:
        if state.holding is not None:
            raise PreconditionViolation(
                f"cannot {step}: an object is currently held ({state.holding})"
            )
        return replace(state, holding=args[0])
    if kind is ActionKind.MOVE_HAND:
        return state
    if state.holding != args[0]:
        held = state.holding if state.holding is not None else "nothing"
        raise PreconditionViolation(f"cannot {step}: {step.args[0]} is not held ({held} is)")
    if kind is ActionKind.RELEASE:
        return replace(state, holding=None)
    if kind is ActionKind.PICK_UP:
        remaining = frozenset(pair for pair in state.on_relations if pair[0] != args[0])
        return replace(state, on_relations=remaining)
    if kind is ActionKind.PUT:
        return replace(state, on_relations=state.on_relations | {(args[0], args[1])})
    if kind in (ActionKind.ROTATE, ActionKind.SLIDE):
        return state._toggle(args[0])
    return state  # MoveOnSurface: no relational effect tracked


@dataclass(frozen=True)
class Violation:
    step_index: int
    reason: str


@dataclass
class ValidationReport:
    final_state: WorldState
    violations: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations


def validate_plan(scene: SceneDescription, steps: Sequence[TaskStep]) -> ValidationReport:
    """Fold apply_step over the plan, collecting every violation with its step index.

    Violating steps are skipped (state unchanged) so later steps are still
    checked against a well-defined state.
    """
    state = WorldState.from_scene(scene)
    violations: list[Violation] = []
    for index, step in enumerate(steps):
        try:
            state = apply_step(state, step)
        except (PreconditionViolation, UnknownObject) as err:
            violations.append(Violation(index, str(err)))
    return ValidationReport(final_state=state, violations=violations)


def describe_state(state: WorldState, base_scene: SceneDescription) -> SceneDescription:
    """Render a simulated state as a scene description.

    Object list and graspability carry over from the base scene; relations are
    the simulated on-relations. Non-"on" relation words are descriptive only
    and are not simulated, so they do not reappear here.
    """
    relations = tuple(
        (base_scene.display_name(s), "on", base_scene.display_name(o))
        for s, o in sorted(state.on_relations)
    )
    holding = base_scene.display_name(state.holding) if state.holding else "nothing"
    opened = [base_scene.display_name(n) for n, flag in state.articulation if flag]
    rationale = f"simulated state after plan execution; holding {holding}"
    if opened:
        rationale += "; toggled open: " + ", ".join(sorted(opened))
    return SceneDescription(objects=base_scene.objects, relations=relations, rationale=rationale)


@dataclass(frozen=True)
class PlanDocument:
    """A validated plan bundled with its before/after scenes."""

    schema_version: str
    instruction: str
    scene_before: SceneDescription
    scene_after: SceneDescription
    steps: tuple[TaskStep, ...]
    summary: str

    @classmethod
    def build(
        cls,
        instruction: str,
        scene_before: SceneDescription,
        steps: Iterable[TaskStep],
        summary: str = "",
        schema_version: str = "1.0",
    ) -> "PlanDocument":
        steps = tuple(steps)
        report = validate_plan(scene_before, steps)
        if not report.valid:
            raise InvalidPlanDocument(report.violations)
        return cls(
            schema_version=schema_version,
            instruction=instruction,
            scene_before=scene_before,
            scene_after=describe_state(report.final_state, scene_before),
            steps=steps,
            summary=summary,
        )
