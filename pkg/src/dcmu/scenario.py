"""Scenario file format: plain-text key/value sections.

A scenario file has one ``[params]`` section and any number of
``[[obstacle]]`` and ``[[robot]]`` sections, each holding ``key = value``
lines.  ``#`` starts a comment.  Unknown keys are rejected.  Units are meters,
seconds, m/s and m^2 (q, r are isotropic noise variances: Q = q*I, R = r*I).

Example::

    [params]
    rho = 20.0
    rho0 = 18.0
    d_beta_min = 1.0
    d_beta_max = 3.0
    d_gamma_min = 1.0
    d_gamma_max = 3.0
    s = 3.494
    epsilon = 0.01
    q = 0.02
    r = 5.0
    dt = 0.2
    v_max = 2.0
    duration = 120.0
    algo = dcmu

    [[obstacle]]
    cx = 30.0
    cy = 6.0
    r = 2.0

    [[robot]]
    role = leader
    x = 0.0
    y = 0.0
    speed = 1.0
    waypoints = [(120.0, 0.0)]

    [[robot]]
    role = follower
    x = -10.0
    y = 0.0
"""

from __future__ import annotations

import ast
from dataclasses import replace

from .consensus import ConsensusGains
from .geometry import Obstacle, Vec2
from .robot_model import NoiseParams, Role
from .simulator import DEFAULT_CONSENSUS_SEED, RobotSpec, Scenario
from .weighted_graph import GraphParams


class ScenarioError(ValueError):
    """Parse or validation failure; message names the offending key and line."""


_REQUIRED_PARAMS = (
    "rho", "rho0", "d_beta_min", "d_beta_max", "d_gamma_min", "d_gamma_max",
    "s", "epsilon", "q", "r", "dt", "v_max", "duration",
)
_OPTIONAL_PARAMS = (
    "collision_radius", "p0", "k_fb", "consensus_rounds", "algo",
    "k1", "k2", "k3", "mix", "sigma_probe", "dt_c", "consensus_seed",
)
_PARAM_KEYS = set(_REQUIRED_PARAMS) | set(_OPTIONAL_PARAMS)
_OBSTACLE_KEYS = {"cx", "cy", "r"}
_ROBOT_KEYS = {"role", "x", "y", "x_hat", "y_hat", "speed", "waypoints"}


def _parse_sections(text: str) -> list[tuple[str, int, dict[str, tuple[str, int]]]]:
    """Split into (section name, header line, {key: (raw value, line)})."""
    sections: list[tuple[str, int, dict[str, tuple[str, int]]]] = []
    current: dict[str, tuple[str, int]] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[["):
            if not line.endswith("]]"):
                raise ScenarioError(f"malformed section header at line {lineno}: {raw!r}")
            name = line[2:-2].strip()
            current = {}
            sections.append((name, lineno, current))
        elif line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError(f"malformed section header at line {lineno}: {raw!r}")
            name = line[1:-1].strip()
            current = {}
            sections.append((name, lineno, current))
        else:
            if current is None:
                raise ScenarioError(f"key outside any section at line {lineno}: {raw!r}")
            if "=" not in line:
                raise ScenarioError(f"expected 'key = value' at line {lineno}: {raw!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if key in current:
                raise ScenarioError(f"duplicate key {key!r} at line {lineno}")
            current[key] = (value.strip(), lineno)
    return sections


def _get_float(entries: dict[str, tuple[str, int]], key: str, section: str) -> float:
    raw, lineno = entries[key]
    try:
        return float(raw)
    except ValueError:
        raise ScenarioError(
            f"key {key!r} in [{section}] at line {lineno} is not a number: {raw!r}"
        ) from None


def _reject_unknown(entries: dict[str, tuple[str, int]], allowed: set[str], section: str) -> None:
    for key, (_, lineno) in entries.items():
        if key not in allowed:
            raise ScenarioError(f"unknown key {key!r} in [{section}] at line {lineno}")


def parse_scenario_text(text: str) -> Scenario:
    sections = _parse_sections(text)
    params_entries: dict[str, tuple[str, int]] | None = None
    obstacles: list[Obstacle] = []
    robots: list[RobotSpec] = []
    for name, header_line, entries in sections:
        if name == "params":
            if params_entries is not None:
                raise ScenarioError(f"duplicate [params] section at line {header_line}")
            _reject_unknown(entries, _PARAM_KEYS, "params")
            params_entries = entries
        elif name == "obstacle":
            _reject_unknown(entries, _OBSTACLE_KEYS, "obstacle")
            for key in ("cx", "cy", "r"):
                if key not in entries:
                    raise ScenarioError(
                        f"missing key {key!r} in [[obstacle]] at line {header_line}"
                    )
            radius = _get_float(entries, "r", "obstacle")
            if radius <= 0.0:
                raise ScenarioError(
                    f"obstacle r must be > 0 at line {entries['r'][1]}"
                )
            obstacles.append(
                Obstacle(
                    Vec2(_get_float(entries, "cx", "obstacle"), _get_float(entries, "cy", "obstacle")),
                    radius,
                )
            )
        elif name == "robot":
            robots.append(_parse_robot(entries, header_line))
        else:
            raise ScenarioError(f"unknown section [{name}] at line {header_line}")
    if params_entries is None:
        raise ScenarioError("missing [params] section")
    for key in _REQUIRED_PARAMS:
        if key not in params_entries:
            raise ScenarioError(f"missing required key {key!r} in [params]")
    if not robots:
        raise ScenarioError("scenario needs at least one [[robot]] section")

    g = lambda k: _get_float(params_entries, k, "params")  # noqa: E731
    rho, rho0 = g("rho"), g("rho0")
    if rho0 >= rho:
        raise ScenarioError(
            f"rho0 must be < rho (line {params_entries['rho0'][1]})"
        )
    try:
        graph = GraphParams(
            rho=rho,
            rho0=rho0,
            d_beta_min=g("d_beta_min"),
            d_beta_max=g("d_beta_max"),
            d_gamma_min=g("d_gamma_min"),
            d_gamma_max=g("d_gamma_max"),
            s=g("s"),
            epsilon=g("epsilon"),
            collision_radius=g("collision_radius") if "collision_radius" in params_entries else 0.5,
        )
        noise = NoiseParams.isotropic(g("q"), g("r"))
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None

    gains = ConsensusGains(
        k1=g("k1") if "k1" in params_entries else ConsensusGains.k1,
        k2=g("k2") if "k2" in params_entries else ConsensusGains.k2,
        k3=g("k3") if "k3" in params_entries else ConsensusGains.k3,
        mix=g("mix") if "mix" in params_entries else ConsensusGains.mix,
        sigma=g("sigma_probe") if "sigma_probe" in params_entries else ConsensusGains.sigma,
        dt_c=g("dt_c") if "dt_c" in params_entries else ConsensusGains.dt_c,
    )
    algo = params_entries.get("algo", ("dcmu", 0))[0]
    if algo not in ("dcmu", "baseline"):
        lineno = params_entries["algo"][1]
        raise ScenarioError(f"algo must be dcmu or baseline (line {lineno})")
    try:
        return Scenario(
            graph=graph,
            noise=noise,
            robots=tuple(robots),
            obstacles=tuple(obstacles),
            dt=g("dt"),
            v_max=g("v_max"),
            duration=g("duration"),
            rounds=int(g("consensus_rounds")) if "consensus_rounds" in params_entries else 200,
            algo=algo,
            p0=g("p0") if "p0" in params_entries else 0.1,
            k_fb=g("k_fb") if "k_fb" in params_entries else 0.14,
            gains=gains,
            consensus_seed=int(g("consensus_seed"))
            if "consensus_seed" in params_entries
            else DEFAULT_CONSENSUS_SEED,
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None


def _parse_robot(entries: dict[str, tuple[str, int]], header_line: int) -> RobotSpec:
    _reject_unknown(entries, _ROBOT_KEYS, "robot")
    for key in ("role", "x", "y"):
        if key not in entries:
            raise ScenarioError(f"missing key {key!r} in [[robot]] at line {header_line}")
    role_raw, role_line = entries["role"]
    if role_raw not in ("leader", "follower"):
        raise ScenarioError(
            f"role must be leader or follower at line {role_line}: {role_raw!r}"
        )
    role = Role(role_raw)
    pos = Vec2(_get_float(entries, "x", "robot"), _get_float(entries, "y", "robot"))
    est = None
    if "x_hat" in entries or "y_hat" in entries:
        if not ("x_hat" in entries and "y_hat" in entries):
            raise ScenarioError(
                f"x_hat and y_hat must appear together in [[robot]] at line {header_line}"
            )
        est = Vec2(_get_float(entries, "x_hat", "robot"), _get_float(entries, "y_hat", "robot"))
    speed = _get_float(entries, "speed", "robot") if "speed" in entries else 0.0
    waypoints: tuple[Vec2, ...] = ()
    if "waypoints" in entries:
        raw, lineno = entries["waypoints"]
        try:
            parsed = ast.literal_eval(raw)
            waypoints = tuple(Vec2(float(px), float(py)) for px, py in parsed)
        except (ValueError, SyntaxError, TypeError):
            raise ScenarioError(
                f"waypoints at line {lineno} must be a list of (x, y) pairs: {raw!r}"
            ) from None
    if role is Role.LEADER and not waypoints:
        raise ScenarioError(
            f"leader robot at line {header_line} needs a waypoints list"
        )
    try:
        return RobotSpec(role=role, position=pos, estimate=est, speed=speed, waypoints=waypoints)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None


def parse_scenario(path: str) -> Scenario:
    """Parse and validate a scenario file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario_text(fh.read())


def serialize_scenario(sc: Scenario) -> str:
    """Canonical text form; parse(serialize(s)) reproduces s exactly."""
    eg = sc.graph
    lines = [
        "[params]",
        f"rho = {eg.rho!r}",
        f"rho0 = {eg.rho0!r}",
        f"d_beta_min = {eg.d_beta_min!r}",
        f"d_beta_max = {eg.d_beta_max!r}",
        f"d_gamma_min = {eg.d_gamma_min!r}",
        f"d_gamma_max = {eg.d_gamma_max!r}",
        f"s = {eg.s!r}",
        f"epsilon = {eg.epsilon!r}",
        f"collision_radius = {eg.collision_radius!r}",
        f"q = {sc.noise.Q[0, 0]!r}",
        f"r = {sc.noise.R[0, 0]!r}",
        f"p0 = {sc.p0!r}",
        f"k_fb = {sc.k_fb!r}",
        f"dt = {sc.dt!r}",
        f"v_max = {sc.v_max!r}",
        f"duration = {sc.duration!r}",
        f"consensus_rounds = {sc.rounds}",
        f"algo = {sc.algo}",
        f"k1 = {sc.gains.k1!r}",
        f"k2 = {sc.gains.k2!r}",
        f"k3 = {sc.gains.k3!r}",
        f"mix = {sc.gains.mix!r}",
        f"sigma_probe = {sc.gains.sigma!r}",
        f"dt_c = {sc.gains.dt_c!r}",
        f"consensus_seed = {sc.consensus_seed}",
    ]
    for obs in sc.obstacles:
        lines += [
            "",
            "[[obstacle]]",
            f"cx = {obs.center.x!r}",
            f"cy = {obs.center.y!r}",
            f"r = {obs.radius!r}",
        ]
    for spec in sc.robots:
        lines += [
            "",
            "[[robot]]",
            f"role = {spec.role.value}",
            f"x = {spec.position.x!r}",
            f"y = {spec.position.y!r}",
        ]
        if spec.estimate is not None:
            lines += [
                f"x_hat = {spec.estimate.x!r}",
                f"y_hat = {spec.estimate.y!r}",
            ]
        if spec.role is Role.LEADER:
            lines.append(f"speed = {spec.speed!r}")
            wp = ", ".join(f"({w.x!r}, {w.y!r})" for w in spec.waypoints)
            lines.append(f"waypoints = [{wp}]")
    return "\n".join(lines) + "\n"


def with_noise(sc: Scenario, q: float, r: float) -> Scenario:
    """Scenario with its noise covariances replaced by q*I, r*I."""
    return replace(sc, noise=NoiseParams.isotropic(q, r))


def with_algo(sc: Scenario, algo: str) -> Scenario:
    return replace(sc, algo=algo)
