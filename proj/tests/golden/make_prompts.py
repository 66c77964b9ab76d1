"""Regenerates prompts_100.tsv: random profile fields followed by the expected prompt.

The expected text is produced here with Python's own formatting so the C++
renderer is checked against an independent implementation.
"""
import random

INT_FIELDS = ["deg", "core", "ego1V", "ego1E", "ego2V", "ego2E", "lp_comm", "lp_size",
              "scoda_comm", "scoda_size", "N", "E", "q25", "q50", "q75"]
REAL_FIELDS = ["cc", "ego1D", "ego2D", "pr", "lp_dens", "scoda_dens", "avgd", "trans", "spec_gap"]


def pagerank_text(v):
    if not v > 0:
        return "0.0"
    exponent = int(f"{v:.1e}".split("e")[1])
    return f"{v:.{max(1, 1 - exponent)}f}"


def render(p):
    return (f"Node profile: local(deg={p['deg']}, cc={p['cc']:.3f}, core={p['core']}, "
            f"ego1V={p['ego1V']}, ego1E={p['ego1E']}, ego1D={p['ego1D']:.3f}, "
            f"ego2V={p['ego2V']}, ego2E={p['ego2E']}, ego2D={p['ego2D']:.3f}, pr={pagerank_text(p['pr'])}); "
            f"global(lp_comm={p['lp_comm']}, lp_size={p['lp_size']}, lp_dens={p['lp_dens']:.3f}; "
            f"scoda_comm={p['scoda_comm']}, scoda_size={p['scoda_size']}, scoda_dens={p['scoda_dens']:.3f}); "
            f"graph(N={p['N']}, E={p['E']}, avgd={p['avgd']:.2f}, trans={p['trans']:.3f}, "
            f"q25={p['q25']}, q50={p['q50']}, q75={p['q75']}, spec_gap={p['spec_gap']:.2f}).")


def main():
    rng = random.Random(42)
    lines = ["\t".join(INT_FIELDS + REAL_FIELDS + ["prompt"])]
    for i in range(100):
        p = {f: rng.randrange(0, 10 ** rng.randrange(1, 7)) for f in INT_FIELDS}
        for f in ["cc", "ego1D", "ego2D", "lp_dens", "scoda_dens", "trans"]:
            p[f] = rng.random()
        p["avgd"] = rng.uniform(0, 200)
        p["spec_gap"] = rng.uniform(0, 50)
        p["pr"] = 10 ** rng.uniform(-7, 0)
        if i % 10 == 0:
            # Values sitting next to a rounding boundary.
            p["pr"] = [0.00995, 0.0999, 1.0, 0.5, 0.000845, 0.95, 0.00084, 1e-9, 0.125, 0.0][i // 10]
            p["cc"] = [0.1665, 0.0005, 1.0, 0.0, 0.9995, 0.5, 0.167, 0.25, 0.3335, 0.001][i // 10]
        values = [str(p[f]) for f in INT_FIELDS] + [repr(p[f]) for f in REAL_FIELDS]
        lines.append("\t".join(values + [render(p)]))
    with open("prompts_100.tsv", "w", newline="\n") as out:
        out.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
