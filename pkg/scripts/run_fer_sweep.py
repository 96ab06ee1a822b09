# scripts/run_fer_sweep.py
import logging
import os
import sys

from tabulate import tabulate

from utils.config_loader import build_sim_config, load_config
from utils.results_store import store_sweep
from utils.simulate import compare_fer, fer_sweep, load_decoder, write_failure_log, write_sweep_csv
from utils.tanner_graph import read_alist


def main(config_path="config.yml") -> int:
    config = load_config(config_path)
    logging.basicConfig(level=config.get("logging", {}).get("level", "INFO"), format="%(message)s")

    out_dir = config.get("output", {}).get("dir", "results")
    os.makedirs(out_dir, exist_ok=True)

    base = build_sim_config(config)
    graph = read_alist(base.code)
    decoders = config.get("simulation", {}).get("decoders", ["faid"])

    # === Run sweeps ===
    results = {}
    for name in decoders:
        cfg = base.with_decoder(name)
        print(f"\n▶️ Running {name} over alpha = {', '.join(f'{a:g}' for a in cfg.alphas)}")
        result = fer_sweep(cfg, load_decoder(cfg, graph))
        results[name] = result

        csv_path = os.path.join(out_dir, f"fer_{name}.csv")
        log_path = os.path.join(out_dir, f"failures_{name}.log")
        write_sweep_csv(result, csv_path)
        write_failure_log(result.failures, log_path)
        if cfg.duckdb:
            store_sweep(cfg.duckdb, name, cfg.config_hash, result.frame(), result.failure_frame())

        print(tabulate(result.frame(), headers="keys", tablefmt="github", showindex=False))
        print(f"   ✓ {len(result.failures)} failures logged to {log_path}")

    # === Ordering check ===
    if "adfaid" in results and "faid" in results:
        print("\n📊 FER(ADFAID) <= FER(FAID):")
        rows = [
            (c.alpha, f"{c.fer_a:.3e}", f"{c.fer_b:.3e}", c.verdict)
            for c in compare_fer(results["adfaid"].rows, results["faid"].rows)
        ]
        print(tabulate(rows, headers=["alpha", "adfaid", "faid", "verdict"], tablefmt="github"))

    # === Invariants ===
    bad = 0
    for name, result in results.items():
        issues = result.degree_violations
        if issues:
            print(f"❌ {name}: {issues} failures break the residual degree property")
        bad += issues
    if not bad:
        print("\n✅ All sweeps finished without invariant violations.")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:2]))
