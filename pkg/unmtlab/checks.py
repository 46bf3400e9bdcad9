# unmtlab/checks.py
#
# Qualitative result patterns of the unbalanced-corpus scenario, read off a
# finished table or report. A check that needs an arm or cell the run did not
# include is skipped; one whose arm produced no score fails.

import logging
from typing import List

import msgspec

from unmtlab.models import Direction, Strategy

GRID_GAP = 2.0
ST_PT_MARGIN = 1.0
SIGNIFICANCE_LEVEL = 0.05
RATIO_PLATEAU = 1.5
PLATEAU_RATIOS = (0.1, 1.0)
EPOCH_TOLERANCE = 0.5
EXTRA_STEPS_MAX_GAIN = 1.0

DIRECTIONS = (Direction.L1_TO_L2.value, Direction.L2_TO_L1.value)
ST_STRATEGIES = (Strategy.ST_UT.value, Strategy.ST_PT.value)


class AcceptanceCheck(msgspec.Struct, frozen=True):
    name: str
    passed: bool
    detail: str


class AcceptanceReport(msgspec.Struct):
    kind: str
    checks: List[AcceptanceCheck] = msgspec.field(default_factory=list)

    @property
    def ok(self):
        return all(check.passed for check in self.checks)

    def get(self, name):
        return next((c for c in self.checks if c.name == name), None)


def _fmt(value):
    return 'n/a' if value is None else f"{value:.2f}"


def _check(name, values, predicate, detail):
    """Fails when any compared value is missing, otherwise applies predicate."""
    if any(v is None for v in values):
        return AcceptanceCheck(name, False, f"missing score ({detail})")
    return AcceptanceCheck(name, bool(predicate(*values)), detail)


# ----------------------------
# Corpus-size grid
# ----------------------------
def grid_checks(table):
    """
    The balanced large grid cell beats the unbalanced one by GRID_GAP points, and
    adding data to one side helps less than adding it to both.
    """
    report = AcceptanceReport(kind='datasize_grid')
    means = {(r.n_x, r.n_y, r.direction): r.bleu_mean for r in table.rows}
    sizes = {r.n_x for r in table.rows} | {r.n_y for r in table.rows}
    big, small = max(sizes, default=0), min(sizes, default=0)
    needed = [(big, big), (big, small), (small, small)]
    if big == small or any((nx, ny, DIRECTIONS[0]) not in means for nx, ny in needed):
        logging.warning(f"⚠️ Grid lacks the {big}/{big}, {big}/{small} and {small}/{small} cells; skipping grid checks")
        return report

    for direction in DIRECTIONS:
        bb, bs, ss = (means[(nx, ny, direction)] for nx, ny in needed)
        one_side = None if bs is None or ss is None else bs - ss
        both_sides = None if bb is None or ss is None else bb - ss
        report.checks.append(_check(
            f"balanced_beats_unbalanced[{direction}]", (bb, bs),
            lambda a, b: a - b >= GRID_GAP,
            f"{big}/{big} {_fmt(bb)} vs {big}/{small} {_fmt(bs)}, need a gap of {GRID_GAP}",
        ))
        report.checks.append(_check(
            f"small_corpus_bounds[{direction}]", (bb, bs, ss),
            lambda a, b, c: b - c < a - c,
            f"gain over {small}/{small} ({_fmt(ss)}): one side {_fmt(one_side)}, both sides {_fmt(both_sides)}",
        ))
    return report


# ----------------------------
# Strategy comparison
# ----------------------------
def strategy_checks(report):
    """ST-PT > ST-UT > extra steps per direction, with a margin and significance for ST-PT."""
    result = AcceptanceReport(kind='experiment')
    summaries = {s.arm: s for s in report.summaries}
    arms = (Strategy.ST_PT.value, Strategy.ST_UT.value, Strategy.BASELINE_EXTRA_STEPS.value)
    if not all(arm in summaries for arm in arms):
        logging.warning(f"⚠️ Strategy checks need the arms {', '.join(arms)}; skipping")
        return result

    p_values = {(e.arm, e.direction): e.result.p_value for e in report.significance}
    for direction in DIRECTIONS:
        attr = 'mean_xy' if direction == Direction.L1_TO_L2.value else 'mean_yx'
        pt, ut, extra = (getattr(summaries[arm], attr) for arm in arms)
        result.checks.append(_check(
            f"st_pt_over_st_ut[{direction}]", (pt, ut), lambda a, b: a > b,
            f"ST_PT {_fmt(pt)} vs ST_UT {_fmt(ut)}",
        ))
        result.checks.append(_check(
            f"st_ut_over_extra_steps[{direction}]", (ut, extra), lambda a, b: a > b,
            f"ST_UT {_fmt(ut)} vs baseline_extra_steps {_fmt(extra)}",
        ))
        result.checks.append(_check(
            f"st_pt_margin[{direction}]", (pt, extra), lambda a, b: a - b >= ST_PT_MARGIN,
            f"ST_PT {_fmt(pt)} vs baseline_extra_steps {_fmt(extra)}, need {ST_PT_MARGIN}",
        ))
        p_value = p_values.get((Strategy.ST_PT.value, direction))
        result.checks.append(_check(
            f"st_pt_significant[{direction}]", (p_value,), lambda p: p < SIGNIFICANCE_LEVEL,
            f"paired bootstrap p={_fmt(p_value)} against the baseline, need < {SIGNIFICANCE_LEVEL}",
        ))
    return result


# ----------------------------
# Sweeps
# ----------------------------
def _rows(table, direction):
    return [r for r in table.rows if r.direction == direction]


def ratio_checks(table):
    """Every one-epoch ST run meets the extra-steps baseline; small ratios already reach the plateau."""
    result = AcceptanceReport(kind='sweep_ratio')
    for direction in DIRECTIONS:
        rows = _rows(table, direction)
        extra = next((r for r in rows if r.arm == Strategy.BASELINE_EXTRA_STEPS.value), None)
        if extra is None:
            logging.warning("⚠️ Ratio sweep has no baseline_extra_steps row; skipping ratio checks")
            return result
        for row in rows:
            if row.strategy not in ST_STRATEGIES:
                continue
            result.checks.append(_check(
                f"meets_extra_steps[{row.arm}][{direction}]", (row.bleu_mean, extra.bleu_mean),
                lambda a, b: a >= b,
                f"{row.arm} {_fmt(row.bleu_mean)} vs baseline_extra_steps {_fmt(extra.bleu_mean)}",
            ))
        for strategy in ST_STRATEGIES:
            by_ratio = {r.epsilon: r.bleu_mean for r in rows if r.strategy == strategy}
            low, high = PLATEAU_RATIOS
            if low not in by_ratio or high not in by_ratio:
                continue
            result.checks.append(_check(
                f"ratio_plateau[{strategy}][{direction}]", (by_ratio[low], by_ratio[high]),
                lambda a, b: abs(a - b) <= RATIO_PLATEAU,
                f"ratio {low:g} {_fmt(by_ratio[low])} vs ratio {high:g} {_fmt(by_ratio[high])}, "
                f"need within {RATIO_PLATEAU}",
            ))
    return result


def epoch_gains(rows):
    """Per-epoch BLEU gains of one arm; None where either epoch has no score."""
    means = [r.bleu_mean for r in sorted(rows, key=lambda r: r.epoch)]
    return [None if a is None or b is None else b - a for a, b in zip(means, means[1:])]


def epoch_checks(table):
    """ST gains shrink epoch over epoch; extra UNMT steps gain little per epoch."""
    result = AcceptanceReport(kind='sweep_epochs')
    for direction in DIRECTIONS:
        rows = _rows(table, direction)
        for arm in sorted({r.arm for r in rows}):
            gains = epoch_gains([r for r in rows if r.arm == arm])
            shown = ', '.join(_fmt(g) for g in gains)
            if arm in ST_STRATEGIES:
                for e in range(1, len(gains)):
                    result.checks.append(_check(
                        f"diminishing_gains[{arm}][epoch {e + 1}][{direction}]", (gains[e - 1], gains[e]),
                        lambda a, b: b <= a + EPOCH_TOLERANCE,
                        f"gains {shown}, tolerance {EPOCH_TOLERANCE}",
                    ))
            elif arm == Strategy.BASELINE_EXTRA_STEPS.value:
                for e, gain in enumerate(gains, start=1):
                    result.checks.append(_check(
                        f"extra_steps_flat[epoch {e}][{direction}]", (gain,),
                        lambda g: g < EXTRA_STEPS_MAX_GAIN,
                        f"gain {_fmt(gain)}, need < {EXTRA_STEPS_MAX_GAIN}",
                    ))
    return result


def log_checks(report):
    """Log each check and return whether all of them passed."""
    if not report.checks:
        logging.info(f"🔍 No acceptance checks apply to this {report.kind} run")
        return True
    for check in report.checks:
        if check.passed:
            logging.info(f"✅ {check.name}: {check.detail}")
        else:
            logging.warning(f"⚠️ {check.name} did not hold: {check.detail}")
    passed = sum(c.passed for c in report.checks)
    logging.info(f"🔍 {report.kind}: {passed} of {len(report.checks)} acceptance checks hold")
    return report.ok
