"""Pipeline stages and the synthetic-to-real transfer experiment.

The "reality gap" between the two generated domains is synthesized from
three ingredients: opposite frame conventions, a different camera rig,
and small observation noise on history states (stronger at night and in
rain). The experiment fits the same closed-form planner on real-only and
on real-plus-synthetic training mixes and scores both on held-out
pseudo-real records, sliced by difficulty.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .curation import (
    EpisodeRecord,
    align_record,
    balance_report,
    build_manifest,
    format_balance_report,
    load_records,
    quota_preset,
    record_from_episode,
    save_records,
    stratified_sample,
)
from .errors import QuotaShortfallError, SchemaError
from .evaluation import EvalSample, ObbFootprint, evaluate_method
from .geometry import RH_FLU_ROOF, RoofOffset, default_camera_rig, normalize_angle
from .i2e import init_params
from .planners import (
    FeatureSpec,
    LinearPlanner,
    Trajectory,
    fit_linear_planner,
    gt_trajectory,
    kinematic_baseline,
    load_planner,
    predict,
    save_planner,
)
from .prompts import export_prompt_pairs
from .reporting import (
    OverlayScene,
    format_delta,
    format_full_report,
    lane_edge_polylines,
    render_overlay_svg,
    slice_assignments,
)
from .simworld import (
    ANCHOR_INDEX,
    Episode,
    drivable_grid,
    episode_from_json_obj,
    episode_to_json_obj,
    instantiate_scenario,
    list_categories,
    simulate_episode,
)
from .geometry import Pose
from .simworld.episodes import Frame
from .simworld.world import EgoState

SIM_CITIES = ("Town13", "Town05", "Town10")
REAL_CITIES = ("Boston", "Singapore")


@dataclass(frozen=True)
class DomainConfig:
    counts: dict[str, int]
    frame_convention: str
    quota: str
    cities: tuple[str, ...]
    noise_pos: float = 0.0
    noise_yaw: float = 0.0
    noise_speed: float = 0.0
    noise_hard_factor: float = 1.0

    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    out_dir: str = "out"
    sim: DomainConfig = field(default_factory=lambda: DomainConfig(
        counts={"e2d": 30, "h2d": 120, "long_tail": 130},
        frame_convention="LH_FRU_WHEEL", quota="HASS", cities=SIM_CITIES))
    real: DomainConfig = field(default_factory=lambda: DomainConfig(
        counts={"e2d": 110, "h2d": 36, "long_tail": 18},
        frame_convention="RH_FLU_ROOF", quota="nuScenes-like", cities=REAL_CITIES,
        noise_pos=0.05, noise_yaw=0.01, noise_speed=0.1, noise_hard_factor=2.0))
    ridge_lambda: float = 1e-3
    i2e_seed: int = 0
    i2e_d_h: int = 16
    i2e_d_e: int = 8
    grid_resolution: float = 0.25
    ego_length: float = 4.0
    ego_width: float = 1.8
    h_roof: float = 1.5
    align: bool = True
    curate_n: int = 0  # 0: use the full pool
    holdout_fraction: float = 0.5

    def feature_spec(self) -> FeatureSpec:
        return FeatureSpec(i2e_seed=self.i2e_seed, i2e_d_h=self.i2e_d_h, i2e_d_e=self.i2e_d_e)

    def to_json_obj(self) -> dict:
        return {
            "seed": self.seed,
            "out_dir": self.out_dir,
            "sim": _domain_obj(self.sim),
            "real": _domain_obj(self.real),
            "planner": {"ridge_lambda": self.ridge_lambda,
                        "i2e": {"seed": self.i2e_seed, "d_h": self.i2e_d_h, "d_e": self.i2e_d_e}},
            "eval": {"grid_resolution": self.grid_resolution,
                     "ego_length": self.ego_length, "ego_width": self.ego_width},
            "h_roof": self.h_roof,
            "align": self.align,
            "curate_n": self.curate_n,
            "holdout_fraction": self.holdout_fraction,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ExperimentConfig":
        try:
            kwargs = {}
            for key in ("seed", "out_dir", "h_roof", "align", "curate_n", "holdout_fraction"):
                if key in obj:
                    kwargs[key] = obj[key]
            for dom in ("sim", "real"):
                if dom in obj:
                    d = obj[dom]
                    kwargs[dom] = DomainConfig(
                        counts={k: int(v) for k, v in d["counts"].items()},
                        frame_convention=d["frame_convention"],
                        quota=d["quota"],
                        cities=tuple(d["cities"]),
                        noise_pos=float(d.get("noise_pos", 0.0)),
                        noise_yaw=float(d.get("noise_yaw", 0.0)),
                        noise_speed=float(d.get("noise_speed", 0.0)),
                        noise_hard_factor=float(d.get("noise_hard_factor", 1.0)),
                    )
            planner = obj.get("planner", {})
            if "ridge_lambda" in planner:
                kwargs["ridge_lambda"] = float(planner["ridge_lambda"])
            i2e = planner.get("i2e", {})
            for src, dst in (("seed", "i2e_seed"), ("d_h", "i2e_d_h"), ("d_e", "i2e_d_e")):
                if src in i2e:
                    kwargs[dst] = int(i2e[src])
            ev = obj.get("eval", {})
            for src, dst in (("grid_resolution", "grid_resolution"),
                             ("ego_length", "ego_length"), ("ego_width", "ego_width")):
                if src in ev:
                    kwargs[dst] = float(ev[src])
            cfg = cls(**kwargs)
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"bad experiment config: {e}") from e
        for dom in (cfg.sim, cfg.real):
            if any(v < 0 for v in dom.counts.values()):
                raise SchemaError("scenario counts must be >= 0")
            quota_preset(dom.quota)
        return cfg


def _domain_obj(d: DomainConfig) -> dict:
    return {
        "counts": d.counts, "frame_convention": d.frame_convention, "quota": d.quota,
        "cities": list(d.cities), "noise_pos": d.noise_pos, "noise_yaw": d.noise_yaw,
        "noise_speed": d.noise_speed, "noise_hard_factor": d.noise_hard_factor,
    }


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return ExperimentConfig.from_json_obj(json.load(fh))


# ---------------------------------------------------------------------------
# Domain generation

def _family_categories(family: str) -> list[str]:
    if family == "e2d":
        return ["E2DCommon"]
    if family == "h2d":
        return ["H2DEnvironmental"]
    if family == "long_tail":
        return list_categories(long_tail_only=True)
    raise SchemaError(f"unknown scenario family {family!r}")


def _apply_observation_noise(r: EpisodeRecord, dom: DomainConfig, rng: np.random.Generator) -> EpisodeRecord:
    if dom.noise_pos == 0 and dom.noise_yaw == 0 and dom.noise_speed == 0:
        return r
    factor = dom.noise_hard_factor if (r.env["time"] == "night" or r.env["weather"] == "rainy") else 1.0
    frames = []
    for f in r.history:
        p = f.ego.pose
        pose = Pose(
            p.x + rng.normal(0.0, dom.noise_pos * factor),
            p.y + rng.normal(0.0, dom.noise_pos * factor),
            p.z,
            normalize_angle(p.yaw + rng.normal(0.0, dom.noise_yaw * factor)),
        )
        v = max(0.0, f.ego.v + rng.normal(0.0, dom.noise_speed * factor))
        frames.append(Frame(t=f.t, ego=EgoState(pose=pose, v=v), agents=f.agents, signals=f.signals))
    return replace(r, history=tuple(frames))


def generate_domain(cfg: ExperimentConfig, domain: str
                    ) -> tuple[list[EpisodeRecord], dict[str, Episode]]:
    """Simulation, record extraction, and (for the real domain) alignment
    plus rig swap plus observation noise. Deterministic in cfg.seed."""
    dom = cfg.sim if domain == "sim" else cfg.real
    salt = 0 if domain == "sim" else 1
    sim_rig = default_camera_rig("sim")
    real_rig = default_camera_rig("real")
    off = RoofOffset(cfg.h_roof)
    noise_rng = np.random.default_rng([cfg.seed, salt, 0xA0])
    records: list[EpisodeRecord] = []
    episodes: dict[str, Episode] = {}
    instance = 0
    for family in ("e2d", "h2d", "long_tail"):
        cats = _family_categories(family)
        for k in range(dom.counts.get(family, 0)):
            category = cats[k % len(cats)]
            attempt = 0
            while True:
                seed = cfg.seed * 1_000_003 + salt * 500_009 + instance * 97 + attempt * 7919 + 11
                spec = instantiate_scenario(category, seed)
                episode = simulate_episode(spec)
                if episode.valid:
                    break
                attempt += 1
                if attempt > 8:
                    raise SchemaError(f"could not generate a valid {category} episode")
            city = dom.cities[instance % len(dom.cities)]
            record = record_from_episode(episode, sim_rig, provenance="sim",
                                         city=city, convention="LH_FRU_WHEEL")
            if domain == "real":
                record = align_record(record, RH_FLU_ROOF, off)
                record = replace(record, cameras=real_rig,
                                 provenance="real",
                                 id=record.id.replace("sim-", "real-", 1))
                record = _apply_observation_noise(record, dom, noise_rng)
            episodes[record.id] = episode
            records.append(record)
            instance += 1
    return records, episodes


# ---------------------------------------------------------------------------
# Evaluation sample construction

def build_eval_samples(
    cfg: ExperimentConfig,
    records: list[EpisodeRecord],
    episodes: dict[str, Episode],
    with_grids: bool = True,
):
    """EvalSamples (agents in the prediction frame) and per-record grids."""
    samples: dict[str, EvalSample] = {}
    grids: dict[str, object] = {}
    for r in records:
        e = episodes[r.id]
        mirror = r.frame_convention != "LH_FRU_WHEEL"
        anchor = e.frames[ANCHOR_INDEX].ego.pose
        cos_a, sin_a = math.cos(anchor.yaw), math.sin(anchor.yaw)
        boxes_per_step = []
        for k in range(1, 7):
            frame = e.frames[ANCHOR_INDEX + k]
            boxes = []
            for a in frame.agents:
                dx = a.pose.x - anchor.x
                dy = a.pose.y - anchor.y
                rx = cos_a * dx + sin_a * dy
                ry = -sin_a * dx + cos_a * dy
                ryaw = normalize_angle(a.pose.yaw - anchor.yaw)
                if mirror:
                    ry = -ry
                    ryaw = normalize_angle(-ryaw)
                boxes.append(ObbFootprint(rx, ry, ryaw, a.length, a.width))
            boxes_per_step.append(tuple(boxes))
        samples[r.id] = EvalSample(
            record_id=r.id,
            gt=np.asarray(r.gt_waypoints),
            agent_boxes=tuple(boxes_per_step),
            anchor_x=anchor.x, anchor_y=anchor.y, anchor_yaw=anchor.yaw,
            mirror=mirror,
            ego_length=cfg.ego_length, ego_width=cfg.ego_width,
        )
        if with_grids:
            grids[r.id] = drivable_grid(e.spec.map, cfg.grid_resolution)
    return samples, grids


def planner_predictions(
    method: str,
    records: list[EpisodeRecord],
    planner: LinearPlanner | None = None,
) -> dict[str, Trajectory]:
    preds = {}
    for r in records:
        if method == "gt":
            preds[r.id] = gt_trajectory(r)
        elif method == "cv":
            preds[r.id] = kinematic_baseline(r, "constant_velocity")
        elif method == "ctrv":
            preds[r.id] = kinematic_baseline(r, "constant_turn_rate")
        elif method == "linear":
            if planner is None:
                raise SchemaError("the linear planner needs fitted weights")
            preds[r.id] = predict(planner, r)
        else:
            raise SchemaError(f"unknown planner {method!r}")
    return preds


# ---------------------------------------------------------------------------
# Pipeline commands

def _paths(cfg: ExperimentConfig) -> dict[str, str]:
    d = cfg.out_dir
    return {
        "sim_records": os.path.join(d, "sim_records.jsonl"),
        "sim_episodes": os.path.join(d, "sim_episodes.jsonl"),
        "sim_manifest": os.path.join(d, "sim_manifest.json"),
        "real_records": os.path.join(d, "real_records.jsonl"),
        "real_episodes": os.path.join(d, "real_episodes.jsonl"),
        "real_manifest": os.path.join(d, "real_manifest.json"),
        "curated_records": os.path.join(d, "curated_records.jsonl"),
        "curated_manifest": os.path.join(d, "curated_manifest.json"),
        "balance_report": os.path.join(d, "balance_report.txt"),
        "prompts": os.path.join(d, "prompts.jsonl"),
        "metrics": os.path.join(d, "metrics.json"),
        "report": os.path.join(d, "report.txt"),
        "overlays": os.path.join(d, "overlays"),
        "planner": os.path.join(d, "planner.json"),
        "sim2real_metrics": os.path.join(d, "sim2real_metrics.json"),
        "sim2real_report": os.path.join(d, "sim2real_report.txt"),
    }


def _save_episodes(episodes: dict[str, Episode], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rid in sorted(episodes):
            fh.write(json.dumps({"record_id": rid,
                                 "episode": episode_to_json_obj(episodes[rid])},
                                sort_keys=True))
            fh.write("\n")


def _load_episodes(path: str) -> dict[str, Episode]:
    episodes = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                episodes[obj["record_id"]] = episode_from_json_obj(obj["episode"])
    return episodes


def _write_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def cmd_generate(cfg: ExperimentConfig, created_at: str = "") -> dict:
    os.makedirs(cfg.out_dir, exist_ok=True)
    paths = _paths(cfg)
    summary = {}
    for domain in ("sim", "real"):
        records, episodes = generate_domain(cfg, domain)
        save_records(records, paths[f"{domain}_records"])
        _save_episodes(episodes, paths[f"{domain}_episodes"])
        manifest = build_manifest(records, seeds=[cfg.seed], version=__version__,
                                  created_at=created_at)
        _write_json(manifest.to_json_obj(), paths[f"{domain}_manifest"])
        summary[domain] = len(records)
    return summary


def cmd_curate(cfg: ExperimentConfig, quota_name: str | None = None,
               strict: bool = True, created_at: str = "") -> dict:
    paths = _paths(cfg)
    for key in ("sim_records",):
        if not os.path.exists(paths[key]):
            raise FileNotFoundError(paths[key])
    pool = load_records(paths["sim_records"])
    quota = quota_preset(quota_name or cfg.sim.quota)
    n = cfg.curate_n or len(pool)
    n = min(n, len(pool))
    result = stratified_sample(pool, quota, n, seed=cfg.seed)
    save_records(result.records, paths["curated_records"])
    report = balance_report(result.records)
    with open(paths["balance_report"], "w", encoding="utf-8") as fh:
        fh.write(format_balance_report(report))
        fh.write("\n")
    manifest = build_manifest(result.records, seeds=[cfg.seed], version=__version__,
                              created_at=created_at)
    _write_json(manifest.to_json_obj(), paths["curated_manifest"])
    if strict and result.shortfalls:
        raise QuotaShortfallError(
            "curation under-filled: " + "; ".join(s.describe() for s in result.shortfalls))
    return {"curated": len(result.records), "shortfalls": len(result.shortfalls)}


def cmd_render_prompts(cfg: ExperimentConfig) -> dict:
    paths = _paths(cfg)
    source = paths["curated_records"] if os.path.exists(paths["curated_records"]) \
        else paths["sim_records"]
    if not os.path.exists(source):
        raise FileNotFoundError(source)
    records = load_records(source)
    with open(paths["prompts"], "w", encoding="utf-8") as fh:
        export_prompt_pairs(records, fh)
    return {"prompts": len(records)}


def cmd_evaluate(cfg: ExperimentConfig, planner_name: str = "gt",
                 weights_path: str | None = None, max_overlays: int = 6) -> dict:
    paths = _paths(cfg)
    for key in ("real_records", "real_episodes"):
        if not os.path.exists(paths[key]):
            raise FileNotFoundError(paths[key])
    records = load_records(paths["real_records"])
    episodes = _load_episodes(paths["real_episodes"])
    samples, grids = build_eval_samples(cfg, records, episodes)
    planner = load_planner(weights_path) if weights_path else None
    preds = planner_predictions(planner_name, records, planner)
    slices = slice_assignments(records)
    report = evaluate_method(planner_name, preds, samples, grids, slices)
    _write_json({"reports": [report.to_json_obj()]}, paths["metrics"])
    with open(paths["report"], "w", encoding="utf-8") as fh:
        fh.write(format_full_report([report]))
        fh.write("\n")
    os.makedirs(paths["overlays"], exist_ok=True)
    for r in records[:max_overlays]:
        svg = render_record_overlay(cfg, r, episodes[r.id],
                                    baseline=kinematic_baseline(r, "constant_velocity"),
                                    model=preds[r.id])
        with open(os.path.join(paths["overlays"], f"{r.id}.svg"), "w", encoding="utf-8") as fh:
            fh.write(svg)
    return {"evaluated": len(records), "method": planner_name}


def render_record_overlay(cfg: ExperimentConfig, r: EpisodeRecord, episode: Episode,
                          baseline: Trajectory, model: Trajectory) -> str:
    samples, _ = build_eval_samples(cfg, [r], {r.id: episode}, with_grids=False)
    s = samples[r.id]
    gt_world = s.ego_to_world(np.asarray(r.gt_waypoints))
    base_world = s.ego_to_world(baseline.waypoints)
    model_world = s.ego_to_world(model.waypoints)
    # Agent boxes are in the prediction frame; map them to world for drawing.
    world_corners = [s.ego_to_world(box.corners()) for box in s.agent_boxes[0]]
    scene = OverlayScene(
        lane_edges=lane_edge_polylines(episode.spec.map.lanes, episode.spec.map.lane_width),
        agent_corners=world_corners,
        gt=gt_world, baseline=base_world, model=model_world,
    )
    return render_overlay_svg(scene)


def cmd_report(cfg: ExperimentConfig) -> str:
    paths = _paths(cfg)
    if not os.path.exists(paths["report"]):
        raise FileNotFoundError(paths["report"])
    with open(paths["report"], "r", encoding="utf-8") as fh:
        return fh.read()


# ---------------------------------------------------------------------------
# The transfer experiment

def _split_holdout(records: list[EpisodeRecord], fraction: float, seed: int):
    ordered = sorted(records, key=lambda r: r.id)
    rng = np.random.default_rng([seed, 0x4E1D])
    perm = rng.permutation(len(ordered))
    n_hold = max(1, int(round(len(ordered) * fraction)))
    hold_idx = set(int(i) for i in perm[:n_hold])
    train = [r for i, r in enumerate(ordered) if i not in hold_idx]
    hold = [r for i, r in enumerate(ordered) if i in hold_idx]
    return train, hold


def run_sim2real_experiment(cfg: ExperimentConfig, align: bool | None = None) -> dict:
    """Fit on real-only vs real-plus-synthetic; score on held-out real.

    Returns per-slice L2/collision for both conditions plus relative
    deltas, and writes the text/JSON artifacts.
    """
    use_align = cfg.align if align is None else align
    os.makedirs(cfg.out_dir, exist_ok=True)
    paths = _paths(cfg)

    real_records, real_episodes = generate_domain(cfg, "real")
    sim_records, _sim_episodes = generate_domain(cfg, "sim")

    real_train, real_hold = _split_holdout(real_records, cfg.holdout_fraction, cfg.seed)
    if len(real_hold) < 10:
        raise SchemaError(f"held-out set too small ({len(real_hold)} records)")

    real_quota = quota_preset(cfg.real.quota)
    curated_real = stratified_sample(real_train, real_quota,
                                     min(len(real_train), max(60, int(0.8 * len(real_train)))),
                                     seed=cfg.seed).records
    if len(curated_real) < cfg.feature_spec().dim:
        curated_real = real_train

    sim_quota = quota_preset(cfg.sim.quota)
    curated_sim = stratified_sample(sim_records, sim_quota,
                                    min(len(sim_records), max(60, int(0.8 * len(sim_records)))),
                                    seed=cfg.seed + 1).records

    off = RoofOffset(cfg.h_roof)
    if use_align:
        sim_for_training = [align_record(r, RH_FLU_ROOF, off) for r in curated_sim]
    else:
        sim_for_training = list(curated_sim)

    spec = cfg.feature_spec()
    planner_real = fit_linear_planner(curated_real, cfg.ridge_lambda, spec)
    planner_mixed = fit_linear_planner(curated_real + sim_for_training, cfg.ridge_lambda, spec)
    save_planner(planner_mixed, paths["planner"])

    hold_episodes = {r.id: real_episodes[r.id] for r in real_hold}
    samples, grids = build_eval_samples(cfg, real_hold, hold_episodes)
    slices = slice_assignments(real_hold)

    reports = []
    results: dict[str, dict] = {}
    for name, planner in (("real_only", planner_real), ("real_plus_sim", planner_mixed)):
        preds = planner_predictions("linear", real_hold, planner)
        rep = evaluate_method(name, preds, samples, grids, slices)
        reports.append(rep)
        results[name] = {s: {"l2": m.l2, "collision_pct": m.collision_pct, "n": m.n}
                         for s, m in rep.slices.items()}

    lines = [f"Transfer experiment (align={'on' if use_align else 'off'}, "
             f"seed={cfg.seed}, held-out real records: {len(real_hold)})", ""]
    lines.append(f"{'slice':<10} {'real-only L2':>14} {'real+sim L2':>22} {'collision real-only':>20} {'real+sim':>16}")
    deltas = {}
    for s in ("E2D", "H2D", "all", "night", "turn", "rainy", "day", "straight", "sunny"):
        if s not in results["real_only"]:
            continue
        a = results["real_only"][s]
        b = results["real_plus_sim"][s]
        deltas[s] = {
            "l2_real_only": a["l2"]["avg"],
            "l2_real_plus_sim": b["l2"]["avg"],
            "l2_delta_pct": (b["l2"]["avg"] - a["l2"]["avg"]) / a["l2"]["avg"] * 100.0
            if a["l2"]["avg"] else 0.0,
            "collision_real_only": a["collision_pct"]["avg"],
            "collision_real_plus_sim": b["collision_pct"]["avg"],
            "n": a["n"],
        }
        lines.append(f"{s:<10} {a['l2']['avg']:>14.3f} "
                     f"{format_delta(b['l2']['avg'], a['l2']['avg']):>22} "
                     f"{a['collision_pct']['avg']:>20.2f} "
                     f"{format_delta(b['collision_pct']['avg'], a['collision_pct']['avg']):>16}")
    out = {
        "align": use_align,
        "seed": cfg.seed,
        "held_out": len(real_hold),
        "train_sizes": {"real_only": len(curated_real),
                        "real_plus_sim": len(curated_real) + len(sim_for_training)},
        "slices": deltas,
    }
    _write_json(out, paths["sim2real_metrics"])
    with open(paths["sim2real_report"], "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
        fh.write("\n\n")
        fh.write(format_full_report(reports))
        fh.write("\n")
    return out
