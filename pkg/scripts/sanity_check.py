# scripts/sanity_check.py
import sys

from tabulate import tabulate

from utils.config_loader import load_config
from utils.decimation import closure_expand, lambda_set, load_schedule, read_triples
from utils.errors import FaidLabError
from utils.levels import load_rules, validate_rule
from utils.tanner_graph import read_alist, validate_code


def inspect_code(path: str, expected: dict) -> bool:
    print(f"\n=== 🧩 Inspecting {path} ===")
    report = validate_code(read_alist(path), expected)
    print(tabulate(report.rows(), tablefmt="plain"))
    for failure in report.failures:
        print(f"⚠️ {failure}")
    if report.ok:
        print("✅ Code matches its expected parameters.")
    return report.ok


def inspect_rules(path: str) -> bool:
    print(f"\n=== 🧩 Inspecting {path} ===")
    ok = True
    for name, rule in load_rules(path, validate=False).items():
        problems = validate_rule(rule)
        print(f"{'✅' if not problems else '❌'} {name} ({rule.kind})")
        for p in problems:
            print(f"   - {p}")
        ok = ok and not problems
    return ok


def inspect_schedule(path: str, generators: str | None = None) -> bool:
    print(f"\n=== 🧩 Inspecting {path} ===")
    schedule = load_schedule(path)
    rows = [("beta1", len(schedule.xi1)), ("Lambda", len(schedule.lam))]
    rows += [(name, len(rule)) for name, rule in zip(schedule.rule_names, schedule.rules)]
    print(tabulate(rows, headers=["rule", "size"], tablefmt="plain"))
    ok = len(schedule.lam) == len(lambda_set())
    if generators:
        xi = closure_expand(read_triples(generators))
        if xi.triples != schedule.xi1.triples:
            print(f"⚠️ {generators} closes to {len(xi)} triples, schedule beta1 has {len(schedule.xi1)}")
            ok = False
    print("✅ Every derived rule is monotone-closed." if ok else "❌ Schedule check failed.")
    return ok


def main(config_path="config.yml") -> int:
    try:
        config = load_config(config_path)
        code = config.get("code", {})
        ok = inspect_code(code["alist"], code.get("expected", {}))
        ok = inspect_rules(config["rules"]["file"]) and ok
        if config.get("schedule"):
            ok = inspect_schedule(config["schedule"], config.get("xi1_generators")) and ok
    except (FaidLabError, KeyError) as exc:
        print(f"❌ {exc}")
        return 2

    print("\n✅ Sanity check complete." if ok else "\n❌ Sanity check found problems.")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:2]))
