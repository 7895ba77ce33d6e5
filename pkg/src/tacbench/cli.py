"""Command-line harness: collect | train | eval | render | bench.

Every command takes an optional JSON run config (validated against a strict
key schema), an output run directory (locked for single ownership, with a
manifest), and a seed.  Reports contain no wall-clock data so that a given
(config, seed) pair reproduces its outputs bitwise.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import os

# honor the thread cap before numpy initialises its BLAS pools
_threads = os.environ.get("TACBENCH_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

MANIFEST_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# run config

DEFAULT_CONFIG = {
    "task": "edge",
    "sensor": "tactip",
    "stimulus": None,
    "seed": 0,
    "env": {
        "trajectory_kind": "straight",
        "trajectory_k": 0.0,
        "sine_amplitude_mm": 0.02,
        "object_mass_g": None,
        "max_steps": None,
        "step_mm": 1.0,
        "step_deg": 1.0,
        "goal_radius": 5.0,
        "grace_steps": 5,
        "stall_steps": 120,
        "progress_weight": 0.5,
        "edge_lost_mm": 10.0,
        "random_start": True,
        "proprio": False,
        "support_friction": 0.3,
    },
    "randomization": {
        "depth_jitter_mm": 0.0,
        "compliance_pct": 0.0,
        "friction_pct": 0.0,
        "obs_noise_max": 0.0,
        "tcp_noise": False,
    },
    "perturbation": {
        "enabled": False,
        "noise_sigma": 0.05,
        "gain_range": [0.9, 1.1],
        "offset_range": [-0.1, 0.1],
        "blur_sigma": 0.5,
        "dropout_p": 0.01,
        "max_depth": 5.0,
    },
    "translator": {
        "kind": "identity",
        "path": None,
        "calibrate_pairs": 0,
    },
    "ppo": {
        "total_steps": 100_000,
        "rollout_steps": 2048,
        "minibatch_size": 256,
        "epochs": 4,
        "gamma": 0.99,
        "lam": 0.95,
        "clip_eps": 0.2,
        "lr": 3e-4,
        "value_coef": 0.5,
        "entropy_coef": 0.0,
        "max_grad_norm": 0.5,
    },
    "collect": {
        "feature": "edge",
        "n_train": 5000,
        "n_val": 2000,
    },
    "eval": {
        "episodes": 1,
        "policy": None,
        "deterministic": True,
    },
    "render": {
        "pose": {"x": 0.0, "y": 0.0, "z": -3.0, "yaw": 0.0},
        "feature": "edge",
    },
    "bench": {
        "masses": [185, 235, 285, 335, 385],
        "sweep_trajectory": "curve",
    },
}


def _merge_validated(base: dict, override: dict, path: str = "") -> dict:
    """Merge override into base, rejecting keys absent from the schema."""
    out = dict(base)
    for key, value in override.items():
        here = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key: {here}")
        if isinstance(base[key], dict) and base[key]:
            if not isinstance(value, dict):
                raise ConfigError(f"{here} must be an object")
            out[key] = _merge_validated(base[key], value, here + ".")
        else:
            out[key] = value
    return out


def load_config(path, seed_override=None) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))   # deep copy
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from e
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be an object")
        cfg = _merge_validated(cfg, user)
    if seed_override is not None:
        cfg["seed"] = seed_override
    return cfg


# ---------------------------------------------------------------------------
# run directory plumbing

class RunDir:
    """Exclusive ownership of an output directory via a lock file."""

    def __init__(self, path):
        self.path = Path(path)
        self.lock = self.path / ".lock"

    def __enter__(self):
        self.path.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RuntimeError(
                f"run directory {self.path} is locked by another process "
                f"(stale? remove {self.lock})") from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc):
        self.lock.unlink(missing_ok=True)
        return False

    def write_manifest(self, command: str, config: dict, outputs: list) -> None:
        manifest = {"schema_version": MANIFEST_SCHEMA_VERSION,
                    "command": command, "config": config,
                    "outputs": sorted(outputs)}
        with open(self.path / "manifest.json", "w") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)


def write_csv(path, rows: list) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        w.writeheader()
        w.writerows(rows)


def write_svg_chart(path, xs, series: dict, title: str,
                    x_label: str, y_label: str) -> None:
    """Minimal deterministic SVG line chart (no external plotting deps)."""
    w, h, m = 640, 400, 60
    xs = np.asarray(xs, dtype=float)
    ys_all = np.concatenate([np.asarray(v, dtype=float) for v in series.values()])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys_all.min()), float(ys_all.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(x):
        return m + (x - x0) / (x1 - x0) * (w - 2 * m)

    def sy(y):
        return h - m - (y - y0) / (y1 - y0) * (h - 2 * m)

    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
             f'<rect width="{w}" height="{h}" fill="white"/>',
             f'<text x="{w//2}" y="24" text-anchor="middle" font-size="16">{title}</text>',
             f'<text x="{w//2}" y="{h-12}" text-anchor="middle" font-size="12">{x_label}</text>',
             f'<text x="16" y="{h//2}" font-size="12" transform="rotate(-90 16 {h//2})" '
             f'text-anchor="middle">{y_label}</text>',
             f'<line x1="{m}" y1="{h-m}" x2="{w-m}" y2="{h-m}" stroke="black"/>',
             f'<line x1="{m}" y1="{m}" x2="{m}" y2="{h-m}" stroke="black"/>']
    for xv in xs:
        parts.append(f'<text x="{sx(xv):.1f}" y="{h-m+18}" text-anchor="middle" '
                     f'font-size="11">{xv:g}</text>')
    for yv in np.linspace(y0, y1, 5):
        parts.append(f'<text x="{m-6}" y="{sy(yv):.1f}" text-anchor="end" '
                     f'font-size="11">{yv:.3g}</text>')
    for i, (name, ys) in enumerate(series.items()):
        pts = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in zip(xs, ys))
        c = colors[i % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="2"/>')
        parts.append(f'<text x="{w-m+4}" y="{m+16*i+12}" font-size="11" '
                     f'fill="{c}">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def save_png(path, depth: np.ndarray, max_depth: float) -> None:
    from PIL import Image
    img = np.clip(depth / max(max_depth, 1e-9), 0.0, 1.0)
    Image.fromarray((img * 255).astype(np.uint8), mode="L").save(path)


# ---------------------------------------------------------------------------
# config -> objects

def _build_perturbation(cfg: dict):
    from .translate import PerturbationModel
    p = cfg["perturbation"]
    if not p["enabled"]:
        return None
    return PerturbationModel(noise_sigma=p["noise_sigma"],
                             gain_range=tuple(p["gain_range"]),
                             offset_range=tuple(p["offset_range"]),
                             blur_sigma=p["blur_sigma"],
                             dropout_p=p["dropout_p"],
                             max_depth=p["max_depth"])


def _build_translator(cfg: dict, perturbation, rng):
    from .translate import Translator, calibrate_affine, load_translator, perturb
    t = cfg["translator"]
    if t["path"] is not None:
        return load_translator(t["path"])
    if t["kind"] == "identity":
        return None
    if t["kind"] == "affine":
        n = int(t["calibrate_pairs"]) or 200
        if perturbation is None:
            raise ConfigError(
                "translator.kind=affine needs perturbation.enabled to "
                "synthesize calibration pairs (or a translator.path)")
        from .data import collect
        feature = "edge" if cfg["task"] == "edge" else "surface"
        ds, _ = collect(cfg["sensor"], feature, n_train=n, n_val=0,
                        seed=cfg["seed"] + 7919)
        pairs = [(perturb(it.image, perturbation, rng), it.image)
                 for it in ds.items]
        return calibrate_affine(pairs)
    raise ConfigError(f"cannot build translator kind {t['kind']!r} without a path")


def _build_env(cfg: dict):
    from .envs import DomainRandomization, EnvConfig, make_env
    r = cfg["randomization"]
    e = cfg["env"]
    env_cfg = EnvConfig(
        task=cfg["task"], sensor_id=cfg["sensor"], stimulus_id=cfg["stimulus"],
        trajectory_kind=e["trajectory_kind"], trajectory_k=e["trajectory_k"],
        sine_amplitude_mm=e["sine_amplitude_mm"],
        object_mass_g=e["object_mass_g"], max_steps=e["max_steps"],
        step_mm=e["step_mm"], step_deg=e["step_deg"],
        goal_radius=e["goal_radius"], grace_steps=e["grace_steps"],
        stall_steps=e["stall_steps"], progress_weight=e["progress_weight"],
        edge_lost_mm=e["edge_lost_mm"], random_start=e["random_start"],
        proprio=e["proprio"],
        randomization=DomainRandomization(
            depth_jitter_mm=r["depth_jitter_mm"],
            compliance_pct=r["compliance_pct"],
            friction_pct=r["friction_pct"],
            obs_noise_max=r["obs_noise_max"],
            tcp_noise=r["tcp_noise"]),
        support_friction=e["support_friction"], seed=cfg["seed"])
    rng = np.random.default_rng(cfg["seed"] + 104729)
    perturbation = _build_perturbation(cfg)
    translator = _build_translator(cfg, perturbation, rng)
    return make_env(env_cfg, perturbation=perturbation, translator=translator)


# ---------------------------------------------------------------------------
# commands

def cmd_collect(cfg: dict, out: Path, dry_run: bool) -> int:
    from .data import collect, save_dataset
    c = cfg["collect"]
    plan = (f"collect {c['n_train']}/{c['n_val']} {cfg['sensor']} "
            f"{c['feature']} images (seed {cfg['seed']})")
    if dry_run:
        print(plan)
        return EXIT_OK
    with RunDir(out) as run:
        print(plan)
        train_ds, val_ds = collect(cfg["sensor"], c["feature"],
                                   n_train=c["n_train"], n_val=c["n_val"],
                                   seed=cfg["seed"])
        save_dataset(train_ds, run.path / "train")
        save_dataset(val_ds, run.path / "val")
        run.write_manifest("collect", cfg, ["train", "val"])
    print(f"wrote {len(train_ds)} train / {len(val_ds)} val items to {out}")
    return EXIT_OK


def cmd_train(cfg: dict, out: Path, dry_run: bool) -> int:
    from .rl.ppo import PPOConfig, train
    p = cfg["ppo"]
    plan = (f"train PPO on {cfg['task']}/{cfg['sensor']} for "
            f"{p['total_steps']} steps (seed {cfg['seed']})")
    if dry_run:
        print(plan)
        return EXIT_OK
    with RunDir(out) as run:
        print(plan)
        env = _build_env(cfg)
        pcfg = PPOConfig(total_steps=p["total_steps"],
                         rollout_steps=p["rollout_steps"],
                         minibatch_size=p["minibatch_size"], epochs=p["epochs"],
                         gamma=p["gamma"], lam=p["lam"], clip_eps=p["clip_eps"],
                         lr=p["lr"], value_coef=p["value_coef"],
                         entropy_coef=p["entropy_coef"],
                         max_grad_norm=p["max_grad_norm"], seed=cfg["seed"])
        net, history = train(env, pcfg,
                             curve_path=run.path / "curve.csv",
                             checkpoint_path=run.path / "policy.tacb",
                             log=lambda r: print(
                                 f"  steps {r['steps']:>7d}  return "
                                 f"{r['mean_return']:8.2f}  episodes "
                                 f"{r['episodes']}  successes {r['successes']}"))
        write_svg_chart(run.path / "curve.svg",
                        [r["steps"] for r in history],
                        {"mean return": [r["mean_return"] for r in history]},
                        f"PPO on {cfg['task']}", "env steps", "mean return")
        run.write_manifest("train", cfg, ["curve.csv", "curve.svg", "policy.tacb"])
    print(f"saved policy and learning curve to {out}")
    return EXIT_OK


def _eval_episodes(cfg: dict, env, net, n_episodes: int, deterministic: bool):
    from .metrics import traj_error
    from .rl.ppo import obs_to_arrays
    rows, traces = [], []
    for ep in range(n_episodes):
        seed = cfg["seed"] + ep
        obs, trace = env.reset(seed)
        rng = np.random.default_rng(seed + 65537)
        for _ in range(env.cfg.resolved_max_steps()):
            img, prop = obs_to_arrays(obs)
            action, _, _ = net.act(img, prop, rng, deterministic=deterministic)
            obs, reward, done, info = env.step(np.clip(action, -1.0, 1.0))
            if done:
                break
        which = "object" if cfg["task"] == "push" else "tcp"
        err = traj_error(trace.positions(which), env.truth_polyline())
        rows.append({"episode": ep, "seed": seed, "steps": len(trace.records),
                     "success": trace.success,
                     "failure_reason": trace.failure_reason or "",
                     "mean_error_mm": err.mean, "max_error_mm": err.max})
        traces.append(trace)
    return rows, traces


def cmd_eval(cfg: dict, out: Path, dry_run: bool) -> int:
    from .rl.nets import PolicyNet
    e = cfg["eval"]
    if e["policy"] is None:
        raise ConfigError("eval.policy (checkpoint path) is required")
    plan = (f"evaluate {e['policy']} on {cfg['task']}/{cfg['sensor']} for "
            f"{e['episodes']} episodes (seed {cfg['seed']})")
    if dry_run:
        print(plan)
        return EXIT_OK
    with RunDir(out) as run:
        print(plan)
        net = PolicyNet.load(e["policy"])
        env = _build_env(cfg)
        rows, traces = _eval_episodes(cfg, env, net, e["episodes"],
                                      e["deterministic"])
        write_csv(run.path / "episodes.csv", rows)
        outputs = ["episodes.csv"]
        for i, trace in enumerate(traces):
            name = f"trace_{i:03d}.jsonl"
            trace.to_jsonl(run.path / name)
            outputs.append(name)
        run.write_manifest("eval", cfg, outputs)
    mean_err = float(np.mean([r["mean_error_mm"] for r in rows]))
    print(f"mean trajectory error {mean_err:.3f} mm over {len(rows)} episodes")
    return EXIT_OK


def cmd_render(cfg: dict, out: Path, dry_run: bool) -> int:
    from .common import Pose4
    from .data import feature_scene
    from .sensors import make_sensor, render_depth
    r = cfg["render"]
    pose = Pose4(r["pose"]["x"], r["pose"]["y"], r["pose"]["z"], r["pose"]["yaw"])
    plan = f"render {cfg['sensor']} at {pose} on the {r['feature']} scene"
    if dry_run:
        print(plan)
        return EXIT_OK
    with RunDir(out) as run:
        print(plan)
        from .data import write_pgm16
        sensor = make_sensor(cfg["sensor"])
        mount = "down" if r["feature"] == "edge" else "horizontal"
        img = render_depth(sensor, pose, feature_scene(r["feature"]), mount)
        write_pgm16(run.path / "depth.pgm", img.depth)
        save_png(run.path / "depth.png", img.depth, sensor.max_penetration)
        run.write_manifest("render", cfg, ["depth.pgm", "depth.png"])
    print(f"max penetration {img.depth.max():.3f} mm; wrote {out}/depth.pgm")
    return EXIT_OK


def cmd_bench(cfg: dict, out: Path, dry_run: bool) -> int:
    from .envs import EnvConfig, make_env
    from .metrics import traj_error
    from .oracles import run_episode, scripted_oracle
    b = cfg["bench"]
    plan = (f"bench scripted oracles + prism mass sweep {b['masses']} "
            f"(seed {cfg['seed']})")
    if dry_run:
        print(plan)
        return EXIT_OK
    with RunDir(out) as run:
        print(plan)
        task_rows = []
        for task, sensor, stimulus in (("edge", "tactip", "disc"),
                                       ("edge", "tactip", "square"),
                                       ("surface", "tactip", "disc"),
                                       ("push", "tactip", "cube")):
            env = make_env(EnvConfig(task=task, sensor_id=sensor,
                                     stimulus_id=stimulus, max_steps=400,
                                     seed=cfg["seed"]))
            trace = run_episode(env, scripted_oracle(task), seed=cfg["seed"])
            which = "object" if task == "push" else "tcp"
            err = traj_error(trace.positions(which), env.truth_polyline())
            task_rows.append({"task": task, "sensor": sensor,
                              "stimulus": stimulus, "steps": len(trace.records),
                              "success": trace.success,
                              "mean_error_mm": err.mean,
                              "max_error_mm": err.max})
            print(f"  {task}/{stimulus}: mean {err.mean:.3f} mm, "
                  f"{len(trace.records)} steps, success {trace.success}")
        write_csv(run.path / "oracle_tasks.csv", task_rows)

        sweep_rows = []
        for mass in b["masses"]:
            env = make_env(EnvConfig(task="push", sensor_id="digit",
                                     stimulus_id="tri_prism",
                                     trajectory_kind=b["sweep_trajectory"],
                                     object_mass_g=float(mass), max_steps=400,
                                     seed=cfg["seed"]))
            trace = run_episode(env, scripted_oracle("push"), seed=cfg["seed"])
            pts = trace.positions("object")
            goal_err = float(np.mean([
                np.min(np.linalg.norm(pts - g, axis=1))
                for g in env.trajectory.goals]))
            sweep_rows.append({"mass_g": mass, "goal_error_mm": goal_err,
                               "success": trace.success,
                               "steps": len(trace.records)})
            print(f"  prism {mass} g: goal error {goal_err:.3f} mm")
        write_csv(run.path / "weight_sweep.csv", sweep_rows)
        write_svg_chart(run.path / "weight_sweep.svg",
                        [r["mass_g"] for r in sweep_rows],
                        {"goal error (mm)": [r["goal_error_mm"]
                                             for r in sweep_rows]},
                        "Push error vs prism mass (DIGIT)", "mass (g)",
                        "goal error (mm)")
        run.write_manifest("bench", cfg, ["oracle_tasks.csv",
                                          "weight_sweep.csv",
                                          "weight_sweep.svg"])
    return EXIT_OK


COMMANDS = {"collect": cmd_collect, "train": cmd_train, "eval": cmd_eval,
            "render": cmd_render, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tacbench",
        description="Tactile sim benchmark: data collection, PPO training, "
                    "evaluation and scripted-oracle benchmarks.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON run config")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default="runs/out", help="run directory")
    parser.add_argument("--dry-run", action="store_true",
                        help="validate the config and print the plan only")
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK

    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return COMMANDS[args.command](cfg, Path(args.out), args.dry_run)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
