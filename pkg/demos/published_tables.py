"""Fit the count and gamma models to the published summary statistics.

Usage: python demos/published_tables.py

Prints both coefficient tables and the #TV generation ratios, then the
PASS/FAIL comparison against the published values.
"""

from soundchain.stats import build_design, irls_fit, pairwise_contrasts, verify_published
from soundchain.stats import published as pub


def main():
    count = irls_fit(build_design(pub.count_rows(), pub.COUNT_SPEC))
    print("count model (classified outputs per generation and structure)")
    print(count.to_text())
    if count.fallback:
        print(f"note: {count.fallback}")

    gamma = irls_fit(build_design(pub.vot_rows(), pub.GAMMA_SPEC))
    print("\ngamma model, log link, VOT in seconds")
    print(gamma.to_text())

    print("\n#TV VOT ratios between generations")
    for c in pairwise_contrasts(gamma, "generation", "#TV"):
        print(f"  {c.label:12s} {c.ratio:.4f}  (SE {c.ratio_se:.4f}, p {c.p:.3f})")

    checks = verify_published()
    failed = [c for c in checks if not c.passed]
    print(f"\n{len(checks) - len(failed)}/{len(checks)} checks pass")
    for c in failed:
        print(c.line())


if __name__ == "__main__":
    main()
