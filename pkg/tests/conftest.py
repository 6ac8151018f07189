from hypothesis import strategies as st

from cantorcdh.bitspace import PointSpec

bits = st.text(alphabet="01", max_size=8)
periods = st.text(alphabet="01", min_size=1, max_size=4)
points = st.builds(PointSpec, bits, periods)

from cantorcdh.bitspace import words
from cantorcdh.tower import BlockPerm, Tower


def random_tower(rng, max_level=4, levels=None, name=""):
    """A coherent tower with random level permutations (blocks may be trivial)."""
    if levels is None:
        levels = sorted(rng.sample(range(1, max_level + 1), rng.randint(1, max_level)))
    levels = [0] + list(levels)
    blocks = [{}]
    for lo, hi in zip(levels, levels[1:]):
        layer = {}
        for s in words(lo):
            table = list(range(1 << (hi - lo)))
            rng.shuffle(table)
            blk = BlockPerm.from_table(hi - lo, table)
            if not blk.is_identity():
                layer[s] = blk
        blocks.append(layer)
    return Tower(levels, blocks, name=name)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)
