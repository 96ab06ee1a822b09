# scripts/mine_failures.py
import logging
import os
import sys

from tabulate import tabulate

from utils.config_loader import build_sim_config, load_config
from utils.simulate import candidate_sets, load_decoder, mine_failures, write_failure_log
from utils.tanner_graph import read_alist


def main(config_path="config.yml") -> int:
    config = load_config(config_path)
    logging.basicConfig(level=config.get("logging", {}).get("level", "INFO"), format="%(message)s")
    mining = config.get("mining", {})
    out_dir = config.get("output", {}).get("dir", "results")
    os.makedirs(out_dir, exist_ok=True)

    base = build_sim_config(config)
    graph = read_alist(base.code)
    candidates = candidate_sets(
        graph,
        trapping_sizes=mining.get("trapping_sizes", [5, 6, 7, 8]),
        beam=mining.get("beam", 16),
        stopping_max_size=mining.get("stopping_max_size"),
    )
    budget = int(mining.get("candidates", 1_000_000))
    common = dict(seed=base.seed, workers=base.workers, chunk=base.chunk, progress=base.progress)

    # === BP fails where the FAID succeeds ===
    bp = load_decoder(base.with_decoder("bp"), graph)
    faid = load_decoder(base.with_decoder("faid"), graph)
    bp_weight = int(mining.get("bp_weight", 5))
    print(f"\n▶️ Searching weight-{bp_weight} supports that defeat BP but not the FAID")
    separation = mine_failures(
        bp, bp_weight, budget, candidates, reference=faid, alpha=float(mining.get("bp_alpha", 0.01)), **common
    )
    if separation.hits:
        hit = separation.hits[0]
        print(f"   ✓ support {','.join(map(str, hit.support))} (candidate #{hit.index})")
    else:
        print(f"⚠️ No separating support in {separation.tried} candidates")

    # === ADFAID failures ===
    adfaid = load_decoder(base.with_decoder("adfaid"), graph)
    weight = int(mining.get("adfaid_weight", 7))
    print(f"\n▶️ Mining weight-{weight} ADFAID failures")
    failures = mine_failures(
        adfaid, weight, budget, candidates, stop_after=int(mining.get("adfaid_hits", 10)), **common
    )
    log_path = os.path.join(out_dir, f"adfaid_failures_w{weight}.log")
    write_failure_log([h.record for h in failures.hits], log_path)
    rows = [
        (
            ",".join(map(str, h.support)),
            h.record.final_rule_index,
            len(h.record.residual),
            int(h.record.residual_is_stopping_set),
            int(h.record.decimated_error),
            int(h.record.degree_violation),
        )
        for h in failures.hits
    ]
    print(tabulate(rows, headers=["support", "j", "residual", "stopping", "dec_err", "violation"], tablefmt="github"))
    print(f"   ✓ {len(failures.hits)} failures logged to {log_path}")

    if failures.degree_violations:
        print(f"❌ {failures.degree_violations} failures break the residual degree property")
        return 1
    print("\n✅ Mining complete.")
    return 0 if separation.hits else 1


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:2]))
