"""Per-user daily outcome panels for single-shot A/B tests.

A panel holds one experiment: every user's per-day outcome across a
contiguous day range indexed relative to allocation. Post-allocation days
are 1..63 by convention, pre-allocation days are -63..-1, and day 0 is
never used. Panels are complete by contract: every user has a value for
every day in the declared range, and loading fails loudly otherwise.

The on-disk format is long-format CSV with a header row and exactly the
columns ``experiment_id,user_id,arm,is_control,day,outcome``.
"""

from __future__ import annotations

import csv
import io
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import IO, Iterable, Mapping

import numpy as np

from .errors import (
    ArmLabelConflict,
    DuplicateObservation,
    MalformedRow,
    MissingDay,
    NoControlArm,
    NonFiniteOutcome,
    NoTreatmentArm,
    OutOfRange,
)

DEFAULT_HORIZON = 63


def days_in_range(d_min: int, d_max: int) -> list[int]:
    """All usable day indices in [d_min, d_max]; day 0 is skipped."""
    return [d for d in range(d_min, d_max + 1) if d != 0]


@dataclass(frozen=True)
class ArmLabel:
    """A named experiment arm; exactly one arm per panel is the control."""

    name: str
    is_control: bool


@dataclass(frozen=True)
class UserRecord:
    """One user's arm assignment and day-indexed outcomes.

    ``outcomes`` maps day index to a finite real value. The record is
    immutable by convention; do not mutate the mapping after construction.
    """

    user_id: str
    arm: ArmLabel
    outcomes: Mapping[int, float]


@dataclass(frozen=True)
class PanelSchema:
    """Column layout of the long-format panel file."""

    columns: tuple[str, ...] = (
        "experiment_id",
        "user_id",
        "arm",
        "is_control",
        "day",
        "outcome",
    )
    delimiter: str = ","


DEFAULT_SCHEMA = PanelSchema()


@dataclass(frozen=True)
class OutcomePanel:
    """A complete outcome panel for one experiment.

    Invariants enforced at construction:

    * every user has an outcome for every day in ``day_range`` (day 0
      excluded), and no days outside it;
    * all outcomes are finite;
    * at least one user is in the control arm and at least one is not;
    * exactly one distinct arm label is marked as control.

    Panels are immutable after construction and safe to share across
    concurrent readers.
    """

    experiment_id: str
    users: tuple[UserRecord, ...]
    day_range: tuple[int, int]
    horizon: int = DEFAULT_HORIZON

    def __post_init__(self) -> None:
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "day_range", tuple(self.day_range))
        if not self.users:
            raise NoControlArm(f"panel {self.experiment_id!r} has no users")
        d_min, d_max = self.day_range
        if d_min > d_max:
            raise OutOfRange(f"invalid day_range [{d_min}, {d_max}]")
        if self.horizon < 1:
            raise OutOfRange(f"horizon must be positive, got {self.horizon}")
        expected = frozenset(days_in_range(d_min, d_max))
        if not expected:
            raise OutOfRange(f"day_range [{d_min}, {d_max}] contains no usable days")

        seen_users: set[str] = set()
        arm_flags: dict[str, bool] = {}
        for user in self.users:
            if user.user_id in seen_users:
                raise DuplicateObservation(
                    f"user {user.user_id!r} appears more than once"
                )
            seen_users.add(user.user_id)
            prior = arm_flags.get(user.arm.name)
            if prior is None:
                arm_flags[user.arm.name] = user.arm.is_control
            elif prior != user.arm.is_control:
                raise ArmLabelConflict(
                    f"arm {user.arm.name!r} is marked both control and non-control"
                )
            keys = user.outcomes.keys()
            if keys != expected:
                missing = expected - keys
                if missing:
                    raise MissingDay(
                        f"user {user.user_id!r} lacks day {min(missing)} "
                        f"inside declared range [{d_min}, {d_max}]"
                    )
                extra = keys - expected
                raise OutOfRange(
                    f"user {user.user_id!r} has day {min(extra)} outside "
                    f"declared range [{d_min}, {d_max}]"
                )
            values = np.fromiter(user.outcomes.values(), dtype=float, count=len(keys))
            if not np.isfinite(values).all():
                raise NonFiniteOutcome(
                    f"user {user.user_id!r} has a non-finite outcome"
                )

        controls = [name for name, flag in arm_flags.items() if flag]
        if not controls:
            raise NoControlArm(f"panel {self.experiment_id!r} has no control arm")
        if len(controls) > 1:
            raise ArmLabelConflict(
                f"panel {self.experiment_id!r} has multiple control arms: {controls}"
            )
        if len(arm_flags) < 2:
            raise NoTreatmentArm(
                f"panel {self.experiment_id!r} has no treatment arm"
            )

    # -- derived views (cached; panels are immutable) --

    @cached_property
    def days(self) -> tuple[int, ...]:
        """Usable day indices in ascending order."""
        return tuple(days_in_range(*self.day_range))

    @cached_property
    def _matrix(self) -> np.ndarray:
        """Read-only (n_users, n_days) outcome matrix, columns = ``days``."""
        days = self.days
        out = np.array(
            [[user.outcomes[d] for d in days] for user in self.users], dtype=float
        )
        out.setflags(write=False)
        return out

    @cached_property
    def arm_labels(self) -> tuple[ArmLabel, ...]:
        """Distinct arm labels in order of first appearance."""
        seen: dict[str, ArmLabel] = {}
        for user in self.users:
            seen.setdefault(user.arm.name, user.arm)
        return tuple(seen.values())

    @property
    def control_arm(self) -> ArmLabel:
        return next(a for a in self.arm_labels if a.is_control)

    @property
    def treatment_arms(self) -> tuple[ArmLabel, ...]:
        return tuple(a for a in self.arm_labels if not a.is_control)

    @property
    def n_users(self) -> int:
        return len(self.users)

    def arm_mask(self, arm: ArmLabel | str) -> np.ndarray:
        """Boolean row mask selecting users in ``arm``."""
        name = arm if isinstance(arm, str) else arm.name
        return np.fromiter(
            (u.arm.name == name for u in self.users), dtype=bool, count=self.n_users
        )

    def users_in_arm(self, arm: ArmLabel | str) -> tuple[UserRecord, ...]:
        name = arm if isinstance(arm, str) else arm.name
        return tuple(u for u in self.users if u.arm.name == name)

    @classmethod
    def from_matrix(
        cls,
        experiment_id: str,
        user_ids: Iterable[str],
        arms: Iterable[ArmLabel],
        days: Iterable[int],
        matrix: np.ndarray,
        horizon: int = DEFAULT_HORIZON,
    ) -> "OutcomePanel":
        """Build a panel from an (n_users, n_days) matrix.

        ``days`` gives the column day indices in ascending order. This is
        the fast path used by the simulator; the matrix is cached so later
        window extraction does not rebuild it from the per-user mappings.
        """
        days = list(days)
        matrix = np.ascontiguousarray(matrix, dtype=float)
        users = tuple(
            UserRecord(uid, arm, dict(zip(days, row.tolist())))
            for uid, arm, row in zip(user_ids, arms, matrix)
        )
        panel = cls(experiment_id, users, (days[0], days[-1]), horizon)
        matrix.setflags(write=False)
        panel.__dict__["_matrix"] = matrix
        return panel


def window(panel: OutcomePanel, from_day: int, to_day: int) -> np.ndarray:
    """Outcome matrix for days ``from_day..to_day``, rows ordered as ``panel.users``.

    The window must lie inside the panel's day range. Day 0 is skipped if
    the window straddles allocation. Returns a read-only array view.
    """
    d_min, d_max = panel.day_range
    if from_day > to_day:
        raise OutOfRange(f"empty window [{from_day}, {to_day}]")
    if from_day < d_min or to_day > d_max:
        raise OutOfRange(
            f"window [{from_day}, {to_day}] outside panel range [{d_min}, {d_max}]"
        )
    days = panel.days
    lo = bisect_left(days, from_day)
    hi = bisect_right(days, to_day)
    if lo == hi:
        raise OutOfRange(f"window [{from_day}, {to_day}] contains no usable days")
    return panel._matrix[:, lo:hi]


def long_term_mean(panel: OutcomePanel, user: UserRecord) -> float:
    """Average daily outcome over post-allocation days 1..horizon."""
    try:
        return math.fsum(user.outcomes[d] for d in range(1, panel.horizon + 1)) / panel.horizon
    except KeyError as exc:
        raise MissingDay(
            f"user {user.user_id!r} lacks day {exc.args[0]} needed for the "
            f"{panel.horizon}-day mean"
        ) from None


def _parse_row(row: list[str], lineno: int, schema: PanelSchema) -> tuple:
    if len(row) != len(schema.columns):
        raise MalformedRow(
            f"line {lineno}: expected {len(schema.columns)} fields, got {len(row)}"
        )
    exp_id, user_id, arm_name, is_control_s, day_s, outcome_s = row
    if is_control_s not in ("true", "false"):
        raise MalformedRow(
            f"line {lineno}: is_control must be 'true' or 'false', got {is_control_s!r}"
        )
    try:
        day = int(day_s)
    except ValueError:
        raise MalformedRow(f"line {lineno}: unparseable day {day_s!r}") from None
    if day == 0:
        raise MalformedRow(f"line {lineno}: day 0 is not a usable day index")
    try:
        outcome = float(outcome_s)
    except ValueError:
        raise MalformedRow(f"line {lineno}: unparseable outcome {outcome_s!r}") from None
    if not math.isfinite(outcome):
        raise NonFiniteOutcome(f"line {lineno}: outcome {outcome_s!r} is not finite")
    return exp_id, user_id, arm_name, is_control_s == "true", day, outcome


def load_panel(
    source: str | Path | IO[str],
    schema: PanelSchema = DEFAULT_SCHEMA,
    horizon: int = DEFAULT_HORIZON,
) -> OutcomePanel:
    """Load and validate a panel from long-format delimited text.

    Args:
        source: path or open text stream positioned at the header row.
        schema: column layout; defaults to the standard six columns.
        horizon: day count treated as "long-term" for this panel.

    Raises:
        MalformedRow: header or a field cannot be parsed.
        DuplicateObservation: two rows share the same (user, day).
        MissingDay: a user lacks a day present in the declared range.
        NoControlArm: no row is labelled as control.
        NonFiniteOutcome: an outcome parses to NaN or infinity.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as handle:
            return load_panel(handle, schema, horizon)

    reader = csv.reader(source, delimiter=schema.delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedRow("empty input: missing header row") from None
    if tuple(header) != schema.columns:
        raise MalformedRow(
            f"bad header {header!r}; expected {list(schema.columns)}"
        )

    experiment_id: str | None = None
    arm_flags: dict[str, bool] = {}
    user_arm: dict[str, str] = {}
    outcomes: dict[str, dict[int, float]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        exp_id, user_id, arm_name, is_control, day, outcome = _parse_row(
            row, lineno, schema
        )
        if experiment_id is None:
            experiment_id = exp_id
        elif exp_id != experiment_id:
            raise MalformedRow(
                f"line {lineno}: experiment_id {exp_id!r} conflicts with "
                f"{experiment_id!r}; one file holds one experiment"
            )
        prior_flag = arm_flags.get(arm_name)
        if prior_flag is None:
            arm_flags[arm_name] = is_control
        elif prior_flag != is_control:
            raise ArmLabelConflict(
                f"line {lineno}: arm {arm_name!r} changes is_control"
            )
        prior_arm = user_arm.get(user_id)
        if prior_arm is None:
            user_arm[user_id] = arm_name
            outcomes[user_id] = {}
        elif prior_arm != arm_name:
            raise ArmLabelConflict(
                f"line {lineno}: user {user_id!r} assigned to both "
                f"{prior_arm!r} and {arm_name!r}"
            )
        per_user = outcomes[user_id]
        if day in per_user:
            raise DuplicateObservation(
                f"line {lineno}: duplicate observation for user {user_id!r} day {day}"
            )
        per_user[day] = outcome

    if experiment_id is None:
        raise MalformedRow("no data rows")
    if not any(arm_flags.values()):
        raise NoControlArm(f"panel {experiment_id!r} has no control arm")

    d_min = min(min(per_user) for per_user in outcomes.values())
    d_max = max(max(per_user) for per_user in outcomes.values())
    labels = {name: ArmLabel(name, flag) for name, flag in arm_flags.items()}
    users = tuple(
        UserRecord(uid, labels[user_arm[uid]], outcomes[uid]) for uid in outcomes
    )
    return OutcomePanel(experiment_id, users, (d_min, d_max), horizon)


def write_panel(panel: OutcomePanel, dest: str | Path | IO[str]) -> None:
    """Serialize a panel to the long-format CSV layout.

    Row order is users as stored, days ascending, so a write/load round
    trip reproduces the panel exactly (floats are written with full
    round-trip precision).
    """
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as handle:
            write_panel(panel, handle)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(DEFAULT_SCHEMA.columns)
    for user in panel.users:
        flag = "true" if user.arm.is_control else "false"
        for day in panel.days:
            writer.writerow(
                (
                    panel.experiment_id,
                    user.user_id,
                    user.arm.name,
                    flag,
                    day,
                    repr(user.outcomes[day]),
                )
            )


def panel_to_csv_text(panel: OutcomePanel) -> str:
    """Render a panel to CSV text (used by tests and small tools)."""
    buf = io.StringIO()
    write_panel(panel, buf)
    return buf.getvalue()
