"""Smoke test for the fairgram_py extension."""

import math

import fairgram_py as fg

GOLD = "[IN:NotHateful [SL:Target Artists [SL:DehumanisingComparison parasites]]]"
PARTIAL = "[SL:Target Artists [SL:DehumanisingComparison parasites]]"


def main():
    plan = fg.plan()
    assert plan["total"] == 1973, plan["total"]
    assert plan["no_injection"] == 1381

    trees = fg.build()
    assert len(trees) == 1973
    assert all(t.binary == t.binary_without_injections for t in trees)
    assert sum(not t.has_injections for t in trees) == 1381
    assert fg.verify_balance(trees)["violations"] == []

    posts = fg.realize(trees[:20], seed=3)
    assert len(posts) == 20 and all(p["text"] for p in posts)

    post = "Artists are parasites"
    assert len(fg.productions(GOLD, post)) == 3
    assert math.isclose(fg.pf1(PARTIAL, GOLD, post), 0.8)
    assert fg.ema(GOLD, GOLD, post) == 1.0
    assert fg.parse_bracket(GOLD) == GOLD

    gm = fg.geometric_mean([60.14, 59.70, 63.18, 57.44, 30.89, 59.16, 64.37, 26.90])
    assert abs(gm - 50.34) <= 0.01, gm
    assert fg.geometric_mean([10.0, 0.0]) is None

    try:
        fg.parse_bracket("[IN:NotHateful")
    except ValueError:
        pass
    else:
        raise AssertionError("malformed bracket accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
