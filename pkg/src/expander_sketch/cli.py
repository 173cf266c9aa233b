"""Command-line front end: expander-sketch {gen-graph,find-inner-code,build,recover,experiment}."""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import analysis, graphs, inner_code, recovery, tanner

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


class CLIError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def write_atomic(path, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, default=_default) + "\n"


# gen-graph ----------------------------------------------------------------

def cmd_gen_graph(N: int, d: int, seed: int, out, tol: float = 1e-6) -> dict:
    try:
        G = graphs.random_regular(N, d, seed)
    except graphs.GraphError as exc:
        raise CLIError(str(exc)) from exc
    graphs.write_graph(G, out)
    record = {"N": N, "d": d, "seed": seed, "tol": tol, "graph_sha256": sha256_file(out)}
    try:
        G = graphs.certify(G, tol=tol, seed=seed)
        record.update(certified=True, certified_lambda=G.certified_lambda, lambda_hat=G.certified_lambda - tol)
    except (graphs.CertificationError, graphs.DisconnectedGraphError, graphs.ConvergenceError) as exc:
        record.update(certified=False, certified_lambda=None, reason=str(exc))
    write_atomic(str(out) + ".cert.json", dumps(record))
    return record


def load_certified_graph(path) -> graphs.RegularGraph:
    cert = Path(str(path) + ".cert.json")
    lam = None
    if cert.exists():
        record = json.loads(cert.read_text())
        if record.get("graph_sha256") not in (None, sha256_file(path)):
            raise CLIError(f"{cert} does not match {path}")
        lam = record.get("certified_lambda")
    return graphs.read_graph(path, certified_lambda=lam)


# find-inner-code -----------------------------------------------------------

def cmd_find_inner_code(d, delta0, rho0, seed, out, *, weight_cap=None, row_cap=None, attempts=50,
                        lp_tol=inner_code.DEFAULT_LP_TOL, budget=inner_code.DEFAULT_BUDGET) -> dict:
    try:
        code = inner_code.search_inner_code(
            d, delta0, rho0, weight_cap=weight_cap, row_cap=row_cap, attempts=attempts,
            seed=seed, lp_tol=lp_tol, budget=budget,
        )
    except inner_code.SearchFailed as exc:
        raise CLIError(str(exc), EXIT_FAILED) from exc
    except (ValueError, inner_code.BudgetExceeded) as exc:
        raise CLIError(str(exc)) from exc
    write_atomic(out, code.to_text())
    cert = code.certificate.to_json()
    cert.update(seed=seed, inner_code_sha256=sha256_file(out))
    write_atomic(str(out) + ".cert.json", dumps(cert))
    return {"k": code.k, "d": code.d, "tau0": code.tau0, "column_weight": code.column_weight}


# build ---------------------------------------------------------------------

def cmd_build(graph_path, code_path, out, seed=None) -> dict:
    G = load_certified_graph(graph_path)
    code = inner_code.InnerCode.load(code_path)
    try:
        A = tanner.assemble(graphs.double_cover(G), code)
    except ValueError as exc:
        raise CLIError(str(exc)) from exc
    fd, tmp = tempfile.mkstemp(dir=Path(out).parent or ".", suffix=".mtx")
    os.close(fd)
    try:
        tanner.export_matrix_market(A, tmp)
        os.replace(tmp, out)
    finally:
        Path(tmp).unlink(missing_ok=True)
    prov = A.provenance(seed)
    prov["inputs"] = {"graph_sha256": sha256_file(graph_path), "inner_code_sha256": sha256_file(code_path)}
    prov["matrix_sha256"] = sha256_file(out)
    prov["structure"] = tanner.structure_report(A)
    write_atomic(str(out) + ".json", dumps(prov))
    return prov


# recover -------------------------------------------------------------------

def cmd_recover(instance_path, out, *, matrix=None, eta=None, lp_tol=recovery.DEFAULT_LP_TOL) -> dict:
    """Solve a recovery instance ``{matrix_path, y, eta, s[, x_true, rho, tau]}``."""
    instance_path = Path(instance_path)
    inst = json.loads(instance_path.read_text())
    if isinstance(inst, list):
        inst = {"y": inst}
    matrix_path = Path(matrix or inst.get("matrix_path", ""))
    if not matrix_path.is_absolute() and not matrix_path.exists():
        matrix_path = instance_path.parent / matrix_path
    if not matrix_path.is_file():
        raise CLIError(f"matrix file {matrix_path} not found")
    eta = float(inst.get("eta", 0.0) if eta is None else eta)
    A = tanner.import_matrix_market(matrix_path)
    try:
        res = recovery.l1_minimize(A, inst["y"], eta, lp_tol=lp_tol)
    except (ValueError, recovery.RecoveryError) as exc:
        raise CLIError(str(exc), EXIT_FAILED) from exc
    result = res.to_json()
    result.update(C1=None, C2=None, **{"pass": None})
    if "rho" in inst and "tau" in inst:
        C1, C2 = recovery.recovery_constants(inst["rho"], inst["tau"])
        result.update(C1=C1, C2=C2)
        if "x_true" in inst:
            rep = recovery.guarantee_check(res.z, inst["x_true"], int(inst.get("s", 0)), eta, inst["rho"], inst["tau"])
            result.update({"pass": rep.passed, "guarantee_slack": rep.slack})
    result["inputs"] = {"instance_sha256": sha256_file(instance_path), "matrix_sha256": sha256_file(matrix_path)}
    write_atomic(out, dumps(result))
    return result


# experiment ----------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Parameters of an end-to-end run.

    ``eta_list`` entries are multiples of ``||x||_1``. ``s`` defaults to the
    inner-code order ``floor(delta0 d)``; ``certify_order`` (default ``s``)
    is the order at which the assembled matrix is certified directly, and 0
    skips that step.
    """

    N: int
    d: int
    delta: float
    seed: int = 0
    trials: int = 10
    eta_list: list[float] = field(default_factory=lambda: [0.0])
    sparsity_model: str = "exact-sparse"
    lp_tol: float = 1e-8
    output_dir: str = "experiment_out"
    rho0: float = 0.3
    weight_cap: int = 3
    attempts: int = 50
    s: int | None = None
    certify_order: int | None = None
    budget: int = inner_code.DEFAULT_BUDGET

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.sparsity_model not in ("exact-sparse", "power-law"):
            raise ValueError("sparsity_model must be 'exact-sparse' or 'power-law'")
        if any(e < 0 for e in self.eta_list):
            raise ValueError("eta_list entries must be non-negative")

    @property
    def delta0(self) -> float:
        return 2 * math.sqrt(self.delta)

    @classmethod
    def from_json(cls, path) -> ExperimentConfig:
        data = json.loads(Path(path).read_text())
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def draw_signal(model: str, n: int, s: int, rng) -> np.ndarray:
    x = np.zeros(n)
    if model == "exact-sparse":
        x[rng.choice(n, size=s, replace=False)] = rng.standard_normal(s)
    else:
        mags = np.arange(1, n + 1, dtype=float) ** -1.5
        x[rng.permutation(n)] = mags * rng.choice([-1.0, 1.0], size=n)
    return x


def draw_noise(m: int, eta: float, rng) -> np.ndarray:
    u = rng.standard_normal(m)
    scale = rng.random()
    if eta == 0:
        return np.zeros(m)
    return eta * scale * u / np.abs(u).sum()


def _run_trial(job):
    A, cfg, s, rho, tau, t = job
    rng = np.random.default_rng([cfg.seed, t])
    x = draw_signal(cfg.sparsity_model, A.n_cols, s, rng)
    rows, apply_t, solve_t = [], 0.0, 0.0
    for j, factor in enumerate(cfg.eta_list):
        eta = factor * float(np.abs(x).sum())
        e = draw_noise(A.n_rows, eta, np.random.default_rng([cfg.seed, t, j]))
        t0 = time.perf_counter()
        y = A.apply(x) + e
        t1 = time.perf_counter()
        res = recovery.l1_minimize(A, y, eta, lp_tol=cfg.lp_tol)
        t2 = time.perf_counter()
        apply_t += t1 - t0
        solve_t += t2 - t1
        rep = recovery.guarantee_check(res.z, x, s, eta, rho, tau)
        rows.append({
            "trial": t,
            "eta_factor": factor,
            "eta": eta,
            "err_l1": rep.lhs,
            "err_inf": float(np.abs(res.z - x).max()),
            "sigma_s": recovery.sigma_s(x, s, 1),
            "bound": rep.rhs,
            "residual": res.residual,
            "pass": bool(rep.passed),
        })
    return rows, apply_t, solve_t


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("EXPANDER_SKETCH_THREADS", "1")))
    except ValueError:
        return 1


def cmd_experiment(cfg: ExperimentConfig) -> tuple[dict, dict]:
    """Run the pipeline; returns ``(report, timings)`` and writes both to output_dir."""
    timings = {}
    t0 = time.perf_counter()
    G = graphs.certify(graphs.random_regular(cfg.N, cfg.d, cfg.seed), seed=cfg.seed)
    H = graphs.double_cover(G)
    timings["graph_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    code = inner_code.search_inner_code(
        cfg.d, cfg.delta0, cfg.rho0, weight_cap=cfg.weight_cap, row_cap=cfg.d,
        attempts=cfg.attempts, seed=cfg.seed, lp_tol=cfg.lp_tol, budget=cfg.budget,
    )
    timings["inner_code_s"] = time.perf_counter() - t0
    A = tanner.assemble(H, code)
    rho, tau = analysis.lift_constants(code.rho0, code.tau0)
    s = code.order if cfg.s is None else cfg.s
    order = s if cfg.certify_order is None else cfg.certify_order

    t0 = time.perf_counter()
    cert_info = {"order": order, "rho": rho, "tau": tau}
    if order > 0:
        tc = analysis.certify_tanner_rnsp(A, order, rho, tau, budget=cfg.budget, lp_tol=cfg.lp_tol, delta=cfg.delta)
        cert_info.update(certified=tc.certified, predicted=tc.predicted, consistent=tc.consistent)
        if tc.certified:
            cert_info["max_value"] = tc.result.max_value
    else:
        cert_info["certified"] = False
    timings["certify_s"] = time.perf_counter() - t0
    certified_pipeline = bool(cert_info["certified"]) and order >= s

    jobs = [(A, cfg, s, rho, tau, t) for t in range(cfg.trials)]
    workers = _workers()
    t0 = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_trial, jobs))
    else:
        outcomes = [_run_trial(job) for job in jobs]
    timings["trials_s"] = time.perf_counter() - t0
    rows = [r for out in outcomes for r in out[0]]
    timings["apply_s"] = sum(o[1] for o in outcomes)
    timings["solve_s"] = sum(o[2] for o in outcomes)

    failures = sum(not r["pass"] for r in rows)
    zero_noise = [r for r in rows if r["eta"] == 0]
    # output_dir only says where to write, so it stays out of the report
    params = {k: v for k, v in asdict(cfg).items() if k != "output_dir"}
    report = {
        "config": params,
        "pipeline": {
            "graph": {"N": G.N, "d": G.d, "certified_lambda": G.certified_lambda},
            "inner_code": {"k": code.k, "d": code.d, "delta0": code.delta0, "rho0": code.rho0,
                           "tau0": code.tau0, "column_weight": code.column_weight,
                           "matrix": ["".join(map(str, r)) for r in code.matrix.tolist()]},
            "structure": tanner.structure_report(A),
            "s": s,
            "C1": recovery.recovery_constants(rho, tau)[0],
            "C2": recovery.recovery_constants(rho, tau)[1],
            "certification": cert_info,
            "certified_pipeline": certified_pipeline,
        },
        "rows": rows,
        "summary": {
            "rows": len(rows),
            "failures": failures,
            "pass_rate": 1.0 - failures / len(rows),
            "exact_recovery_rate": (
                sum(r["err_inf"] <= 1e-6 for r in zero_noise) / len(zero_noise) if zero_noise else None
            ),
        },
    }
    config_json = dumps(params)
    report["provenance"] = {
        "config_sha256": sha256_bytes(config_json.encode()),
        "graph_sha256": sha256_bytes(G.edges.tobytes()),
        "matrix_sha256": sha256_bytes(A.indptr.tobytes() + A.indices.tobytes()),
    }
    out = Path(cfg.output_dir)
    write_atomic(out / "report.json", dumps(report))
    write_atomic(out / "timings.json", dumps({"config_sha256": report["provenance"]["config_sha256"], **timings}))
    return report, timings


# argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--lp-tol", type=float, default=1e-8)
    common.add_argument("--budget", type=int, default=inner_code.DEFAULT_BUDGET)
    common.add_argument("--json", action="store_true", help="print a JSON summary on stdout")

    p = argparse.ArgumentParser(prog="expander-sketch", description=__doc__, parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-graph", parents=[common], help="sample and certify a random regular graph")
    g.add_argument("--N", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--tol", type=float, default=1e-6)
    g.add_argument("--out", required=True)

    f = sub.add_parser("find-inner-code", parents=[common], help="search for a certified inner code")
    f.add_argument("--d", type=int, required=True)
    f.add_argument("--delta0", type=float, required=True)
    f.add_argument("--rho0", type=float, default=0.3)
    f.add_argument("--weight-cap", type=int)
    f.add_argument("--row-cap", type=int)
    f.add_argument("--attempts", type=int, default=50)
    f.add_argument("--out", required=True)

    b = sub.add_parser("build", parents=[common], help="assemble the Tanner matrix")
    b.add_argument("--graph", required=True)
    b.add_argument("--inner-code", required=True)
    b.add_argument("--out", required=True)

    r = sub.add_parser("recover", parents=[common], help="solve an l1 recovery instance")
    r.add_argument("instance", help="JSON {matrix_path, y, eta, s[, x_true, rho, tau]} or a bare y array")
    r.add_argument("--matrix")
    r.add_argument("--eta", type=float)
    r.add_argument("--out", required=True)

    e = sub.add_parser("experiment", parents=[common], help="run an end-to-end experiment")
    e.add_argument("--config", required=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen-graph":
            summary = cmd_gen_graph(args.N, args.d, args.seed, args.out, tol=args.tol)
            code = EXIT_OK if summary["certified"] else EXIT_FAILED
        elif args.command == "find-inner-code":
            summary = cmd_find_inner_code(
                args.d, args.delta0, args.rho0, args.seed, args.out, weight_cap=args.weight_cap,
                row_cap=args.row_cap, attempts=args.attempts, lp_tol=args.lp_tol, budget=args.budget,
            )
            code = EXIT_OK
        elif args.command == "build":
            summary = cmd_build(args.graph, args.inner_code, args.out, seed=args.seed)
            code = EXIT_OK
        elif args.command == "recover":
            summary = cmd_recover(args.instance, args.out, matrix=args.matrix, eta=args.eta, lp_tol=args.lp_tol)
            code = EXIT_FAILED if summary.get("pass") is False else EXIT_OK
        else:
            try:
                cfg = ExperimentConfig.from_json(args.config)
            except (OSError, ValueError, TypeError) as exc:
                raise CLIError(f"bad config {args.config}: {exc}") from exc
            report, _ = cmd_experiment(cfg)
            summary = report["summary"]
            failed = report["pipeline"]["certified_pipeline"] and summary["failures"] > 0
            code = EXIT_FAILED if failed else EXIT_OK
    except CLIError as exc:
        print(f"expander-sketch {args.command}: error: {exc}", file=sys.stderr)
        return exc.code
    except (OSError, ValueError) as exc:
        print(f"expander-sketch {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.json:
        print(dumps(summary), end="")
    return code


if __name__ == "__main__":
    sys.exit(main())
