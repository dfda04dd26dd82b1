"""Shared test helpers: scenes, random valid-plan generation, and alternation checks."""

from __future__ import annotations

import random

from demo2plan.task_model import ActionKind, SceneDescription, SceneObject, TaskStep


def make_scene(*names: str, relations=(), graspable=None) -> SceneDescription:
    graspable = graspable or {}
    objects = tuple(SceneObject(n, graspable.get(n, True)) for n in names)
    return SceneDescription(objects=objects, relations=tuple(relations))


JUICE_SCENE = make_scene(
    "juice", "bottom shelf", "top shelf",
    relations=[("juice", "on", "bottom shelf")],
    graspable={"bottom shelf": False, "top shelf": False},
)

JUICE_PLAN = (
    TaskStep(ActionKind.GRAB, ("juice",)),
    TaskStep(ActionKind.PICK_UP, ("juice",)),
    TaskStep(ActionKind.MOVE_HAND, ("top shelf",)),
    TaskStep(ActionKind.PUT, ("juice", "top shelf")),
    TaskStep(ActionKind.RELEASE, ("juice",)),
)


def random_valid_plan(rng: random.Random, scene: SceneDescription, length: int) -> list[TaskStep]:
    """Generate a plan that is valid by construction: only legal actions are sampled."""
    names = scene.object_names()
    graspable = [o.name for o in scene.objects if o.graspable]
    holding = None
    steps: list[TaskStep] = []
    for _ in range(length):
        if holding is None:
            choices = [(ActionKind.MOVE_HAND, (rng.choice(names),))]
            if graspable:
                choices.append((ActionKind.GRAB, (rng.choice(graspable),)))
        else:
            choices = [
                (ActionKind.MOVE_HAND, (rng.choice(names),)),
                (ActionKind.RELEASE, (holding,)),
                (ActionKind.PICK_UP, (holding,)),
                (ActionKind.PUT, (holding, rng.choice(names))),
                (ActionKind.ROTATE, (holding,)),
                (ActionKind.SLIDE, (holding,)),
                (ActionKind.MOVE_ON_SURFACE, (holding,)),
            ]
        action, args = rng.choice(choices)
        steps.append(TaskStep(action, args))
        if action is ActionKind.GRAB:
            holding = args[0]
        elif action is ActionKind.RELEASE:
            holding = None
    return steps


def grab_release_alternate(steps) -> bool:
    """True when Grab/Release strictly alternate, starting with Grab."""
    expected = ActionKind.GRAB
    for step in steps:
        if step.action not in (ActionKind.GRAB, ActionKind.RELEASE):
            continue
        if step.action is not expected:
            return False
        expected = ActionKind.RELEASE if expected is ActionKind.GRAB else ActionKind.GRAB
    return True
