"""Named acquisition rules and their sequential composition.

A rule maps the fitted model and the round's RNG stream to a
:class:`~ctxbo.acquisition.Decision`. Sequential rules pick the parameters
first (at a context drawn uniformly for that round) and then pick the
context — adaptively via BALD or uniformly at random for the control
variants.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .acquisition import (
    AcquisitionConfig,
    Decision,
    maximize_ckg,
    select_duel_kss,
    select_duel_muc,
    select_joint_bald,
    select_s_bald,
    select_x_ts,
    select_x_ucb,
)
from .domain import Domain
from .features import FeatureMap, build_feature_map
from .laplace import LaplaceState


@dataclass
class RuleContext:
    """Per-run resources handed to a rule on every round."""

    domain: Domain
    config: AcquisitionConfig
    rng: np.random.Generator
    fmap: FeatureMap | None = None

    def feature_map(self, state: LaplaceState) -> FeatureMap:
        if self.fmap is None:
            self.fmap = build_feature_map(state.kernel, self.domain.packed_box)
        return self.fmap


def _random_x(ctx: RuleContext):
    return ctx.domain.search_box.sample(ctx.rng)


def _random_s(ctx: RuleContext):
    return ctx.domain.context_box.sample(ctx.rng)


def _x_selector(name: str):
    """Parameter-selection step; returns x or an (x, x2) duel."""

    def ucb(state, ctx, s0):
        seed = int(ctx.rng.integers(2**31))
        x, _ = select_x_ucb(state, s0, ctx.domain.search_box, ctx.config, seed=seed)
        return x

    def ts(state, ctx, s0):
        return select_x_ts(state, ctx.feature_map(state), s0, ctx.domain.search_box, ctx.rng, ctx.config)

    def kss(state, ctx, s0):
        return select_duel_kss(state, ctx.feature_map(state), s0, ctx.domain.search_box, ctx.rng, ctx.config)

    def muc(state, ctx, s0):
        seed = int(ctx.rng.integers(2**31))
        return select_duel_muc(state, s0, ctx.domain.search_box, ctx.config, seed=seed)

    def random_x(state, ctx, s0):
        return _random_x(ctx)

    def random_duel(state, ctx, s0):
        return _random_x(ctx), _random_x(ctx)

    return {
        "ucb": ucb,
        "ts": ts,
        "kss": kss,
        "muc": muc,
        "random": random_x,
        "random-duel": random_duel,
    }[name]


def _s_selector(name: str):
    def bald(state, ctx, x, x2):
        return select_s_bald(state, x, ctx.domain.context_box, ctx.config, x2_fixed=x2)

    def random_s(state, ctx, x, x2):
        return _random_s(ctx)

    return {"bald": bald, "random": random_s}[name]


def compose_sequential(x_rule: str, context_rule: str, duel: bool = False):
    """Build a rule that picks x (at a uniformly drawn context) then s."""
    pick_x = _x_selector(x_rule)
    pick_s = _s_selector(context_rule)

    def rule(state: LaplaceState, ctx: RuleContext) -> Decision:
        t0 = time.perf_counter()
        s0 = _random_s(ctx)
        chosen = pick_x(state, ctx, s0)
        x, x2 = (chosen if duel else (chosen, None))
        s = pick_s(state, ctx, x, x2)
        return Decision(
            s=np.atleast_1d(s),
            x=x,
            x2=x2,
            diagnostics={"wall_time": time.perf_counter() - t0, "s0": np.atleast_1d(s0).tolist()},
        )

    return rule


def _ckg_rule(state, ctx: RuleContext) -> Decision:
    seed = int(ctx.rng.integers(2**31))
    return maximize_ckg(state, ctx.domain, ctx.config, seed=seed)


def _bald_joint_rule(state, ctx: RuleContext) -> Decision:
    t0 = time.perf_counter()
    seed = int(ctx.rng.integers(2**31))
    point = select_joint_bald(state, ctx.domain, ctx.config, seed=seed)
    return Decision(
        s=point.s,
        x=point.x,
        x2=point.x2,
        diagnostics={"wall_time": time.perf_counter() - t0},
    )


def _fully_random_rule(state, ctx: RuleContext) -> Decision:
    t0 = time.perf_counter()
    x2 = _random_x(ctx) if ctx.domain.duel else None
    return Decision(
        s=np.atleast_1d(_random_s(ctx)),
        x=_random_x(ctx),
        x2=x2,
        diagnostics={"wall_time": time.perf_counter() - t0},
    )


_BINARY_RULES = {
    "ckg": lambda: _ckg_rule,
    "ucb-ald": lambda: compose_sequential("ucb", "bald"),
    "ts-ald": lambda: compose_sequential("ts", "bald"),
    "ucb-rand-s": lambda: compose_sequential("ucb", "random"),
    "ts-rand-s": lambda: compose_sequential("ts", "random"),
    "bald": lambda: _bald_joint_rule,
    "random": lambda: _fully_random_rule,
}

_PREF_RULES = {
    "kss-ald": lambda: compose_sequential("kss", "bald", duel=True),
    "muc-ald": lambda: compose_sequential("muc", "bald", duel=True),
    "kss-rand-s": lambda: compose_sequential("kss", "random", duel=True),
    "muc-rand-s": lambda: compose_sequential("muc", "random", duel=True),
    "bald": lambda: _bald_joint_rule,
    "random": lambda: _fully_random_rule,
}

RULE_IDS = sorted(set(_BINARY_RULES) | set(_PREF_RULES))


def make_rule(rule_id: str, mode: str):
    """Look up a rule by its stable identifier for the given feedback mode."""
    table = _PREF_RULES if mode == "preferential" else _BINARY_RULES
    try:
        return table[rule_id]()
    except KeyError:
        raise ValueError(f"unknown rule {rule_id!r} for mode {mode!r}") from None


def rules_for_mode(mode: str):
    return sorted((_PREF_RULES if mode == "preferential" else _BINARY_RULES).keys())
