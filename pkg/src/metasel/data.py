"""Dataset ingestion: MovieLens-100K-format parsing, census-income join,
feature encoding, per-user/per-item rating statistics, and CV folds.

All feature scaling is fit on a designated training partition and reused
verbatim for the remaining rows, so nothing observed only in a test fold can
leak into the encoders.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import schema

logger = logging.getLogger(__name__)

MONTHS = {
    "Jan": 1, "Feb": 2, "Mar": 3, "Apr": 4, "May": 5, "Jun": 6,
    "Jul": 7, "Aug": 8, "Sep": 9, "Oct": 10, "Nov": 11, "Dec": 12,
}


class DataError(ValueError):
    """Malformed or missing input data; message names the file (and line)."""


def _parse_error(path, lineno, msg) -> DataError:
    return DataError(f"{path}:{lineno}: {msg}")


@dataclass
class RatingTable:
    """Column-oriented rating triples, in file order."""

    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    timestamps: np.ndarray | None = None
    scale: tuple[float, float] = (1.0, 5.0)

    def __post_init__(self):
        self.users = np.asarray(self.users, dtype=np.int64)
        self.items = np.asarray(self.items, dtype=np.int64)
        self.ratings = np.asarray(self.ratings, dtype=np.float64)

    @property
    def n(self) -> int:
        return len(self.ratings)

    @classmethod
    def from_rows(cls, rows, scale=(1.0, 5.0)) -> "RatingTable":
        """Build from (user, item, rating) triples; handy in tests."""
        rows = list(rows)
        users = [r[0] for r in rows]
        items = [r[1] for r in rows]
        ratings = [r[2] for r in rows]
        return cls(np.array(users), np.array(items), np.array(ratings), scale=scale)

    def subset(self, idx) -> "RatingTable":
        ts = None if self.timestamps is None else self.timestamps[idx]
        return RatingTable(self.users[idx], self.items[idx], self.ratings[idx], ts, self.scale)


@dataclass
class UserProfile:
    user_id: int
    age: int
    gender: str
    occupation: str
    zip: str


@dataclass
class ItemProfile:
    item_id: int
    title: str
    release_year: int | None
    genres: np.ndarray  # fixed-length 0/1 vector


@dataclass
class RawDataset:
    ratings: RatingTable
    users: dict[int, UserProfile]
    items: dict[int, ItemProfile]
    occupations: tuple[str, ...]
    genres: tuple[str, ...]

    @property
    def n_ratings(self) -> int:
        return self.ratings.n

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)


def _read_lines(path, encoding):
    try:
        with open(path, encoding=encoding) as fh:
            return fh.read().splitlines()
    except FileNotFoundError:
        raise DataError(f"missing file: {path}") from None


def _parse_release_year(text, path, lineno) -> int | None:
    """Parse dates like ``01-Jan-1995``; empty means unknown."""
    text = text.strip()
    if not text:
        return None
    parts = text.split("-")
    if len(parts) != 3 or parts[1] not in MONTHS:
        raise _parse_error(path, lineno, f"bad release date {text!r}")
    try:
        return int(parts[2])
    except ValueError:
        raise _parse_error(path, lineno, f"bad release year in {text!r}") from None


def load_movielens(data_dir, scale=(1.0, 5.0)) -> RawDataset:
    """Load a MovieLens-100K-format directory (u.data, u.user, u.item).

    Optional ``u.occupation`` / ``u.genre`` files override the built-in
    vocabularies.  Record order follows file order.
    """
    data_dir = str(data_dir)
    occ_path = f"{data_dir}/u.occupation"
    try:
        occupations = tuple(
            line.strip() for line in _read_lines(occ_path, "ISO-8859-1") if line.strip()
        )
    except DataError:
        occupations = schema.OCCUPATIONS
    genre_path = f"{data_dir}/u.genre"
    try:
        genres = tuple(
            line.split("|")[0] for line in _read_lines(genre_path, "ISO-8859-1") if line.strip()
        )
    except DataError:
        genres = schema.GENRES

    users_path = f"{data_dir}/u.user"
    users: dict[int, UserProfile] = {}
    for lineno, line in enumerate(_read_lines(users_path, "ISO-8859-1"), start=1):
        if not line.strip():
            continue
        parts = line.split("|")
        if len(parts) != 5:
            raise _parse_error(users_path, lineno, f"expected 5 pipe-separated fields, got {len(parts)}")
        try:
            uid, age = int(parts[0]), int(parts[1])
        except ValueError:
            raise _parse_error(users_path, lineno, "non-integer user id or age") from None
        gender, occupation, zip_code = parts[2], parts[3], parts[4].strip()
        if uid <= 0:
            raise _parse_error(users_path, lineno, f"user id must be positive, got {uid}")
        if age <= 0:
            raise _parse_error(users_path, lineno, f"age must be positive, got {age}")
        if gender not in schema.GENDERS:
            raise _parse_error(users_path, lineno, f"unknown gender {gender!r}")
        if occupation not in occupations:
            raise _parse_error(users_path, lineno, f"occupation {occupation!r} not in vocabulary")
        users[uid] = UserProfile(uid, age, gender, occupation, zip_code)

    items_path = f"{data_dir}/u.item"
    items: dict[int, ItemProfile] = {}
    n_genres = len(genres)
    for lineno, line in enumerate(_read_lines(items_path, "ISO-8859-1"), start=1):
        if not line.strip():
            continue
        parts = line.split("|")
        if len(parts) != 5 + n_genres:
            raise _parse_error(
                items_path, lineno,
                f"expected {5 + n_genres} pipe-separated fields, got {len(parts)}",
            )
        try:
            iid = int(parts[0])
        except ValueError:
            raise _parse_error(items_path, lineno, "non-integer item id") from None
        if iid <= 0:
            raise _parse_error(items_path, lineno, f"item id must be positive, got {iid}")
        year = _parse_release_year(parts[2], items_path, lineno)
        try:
            flags = np.array([int(x) for x in parts[5:]], dtype=np.int8)
        except ValueError:
            raise _parse_error(items_path, lineno, "non-integer genre flag") from None
        if not np.isin(flags, (0, 1)).all():
            raise _parse_error(items_path, lineno, "genre flags must be 0/1")
        items[iid] = ItemProfile(iid, parts[1], year, flags)

    ratings_path = f"{data_dir}/u.data"
    u_col, i_col, r_col, t_col = [], [], [], []
    r_min, r_max = scale
    for lineno, line in enumerate(_read_lines(ratings_path, "ISO-8859-1"), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise _parse_error(ratings_path, lineno, f"expected 4 tab-separated fields, got {len(parts)}")
        try:
            uid, iid, rating, ts = int(parts[0]), int(parts[1]), float(parts[2]), int(parts[3])
        except ValueError:
            raise _parse_error(ratings_path, lineno, "non-numeric field") from None
        if not (r_min <= rating <= r_max):
            raise _parse_error(ratings_path, lineno, f"rating {rating} out of scale [{r_min}, {r_max}]")
        if uid not in users:
            raise _parse_error(ratings_path, lineno, f"rating references unknown user {uid}")
        if iid not in items:
            raise _parse_error(ratings_path, lineno, f"rating references unknown item {iid}")
        u_col.append(uid)
        i_col.append(iid)
        r_col.append(rating)
        t_col.append(ts)
    if not u_col:
        raise DataError(f"{ratings_path}: no rating records")

    table = RatingTable(
        np.array(u_col), np.array(i_col), np.array(r_col),
        np.array(t_col, dtype=np.int64), scale,
    )
    logger.info(
        "loaded %s: %d ratings, %d users, %d items",
        data_dir, table.n, len(users), len(items),
    )
    return RawDataset(table, users, items, occupations, genres)


# ---------------------------------------------------------------------------
# Census income join
# ---------------------------------------------------------------------------

@dataclass
class IncomeTable:
    """zip -> median household income, with a global-median fallback."""

    by_zip: dict[str, float]
    global_median: float = field(init=False)

    def __post_init__(self):
        if not self.by_zip:
            raise DataError("income table is empty")
        values = np.array(list(self.by_zip.values()), dtype=np.float64)
        if (values <= 0).any():
            raise DataError("income table contains non-positive incomes")
        self.global_median = float(np.median(values))

    def lookup(self, zip_code: str) -> tuple[float, bool]:
        """Exact match, then 5-digit prefix, then global median.

        Returns (income, matched) where matched is False on fallback.
        """
        zip_code = zip_code.strip()
        if zip_code in self.by_zip:
            return self.by_zip[zip_code], True
        prefix = zip_code[:5]
        if prefix.isdigit() and prefix in self.by_zip:
            return self.by_zip[prefix], True
        return self.global_median, False


def load_income_csv(path) -> IncomeTable:
    """Read a ``zip,income`` CSV with a header row."""
    by_zip: dict[str, float] = {}
    try:
        fh = open(path, encoding="utf-8", newline="")
    except FileNotFoundError:
        raise DataError(
            f"missing income CSV: {path} (expected header 'zip,income', one row per ZIP code)"
        ) from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["zip", "income"]:
            raise DataError(f"{path}:1: expected header 'zip,income'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise _parse_error(path, lineno, "expected 'zip,income' fields")
            try:
                income = float(row[1])
            except ValueError:
                raise _parse_error(path, lineno, f"non-numeric income {row[1]!r}") from None
            if income <= 0:
                raise _parse_error(path, lineno, f"income must be positive, got {income}")
            by_zip[row[0].strip()] = income
    if not by_zip:
        raise DataError(f"{path}: no income rows")
    return IncomeTable(by_zip)


# ---------------------------------------------------------------------------
# Per-user / per-item rating statistics
# ---------------------------------------------------------------------------

def _stats_vector(values: np.ndarray) -> np.ndarray:
    """mean, population std, min, max, median, count."""
    return np.array([
        values.mean(),
        values.std(),  # population convention (divide by n)
        values.min(),
        values.max(),
        float(np.median(values)),
        float(len(values)),
    ])


@dataclass
class EFStats:
    """Training-split rating statistics per user and per item."""

    user_stats: dict[int, np.ndarray]
    item_stats: dict[int, np.ndarray]
    global_stats: np.ndarray

    def user_vector(self, user_id: int) -> np.ndarray:
        return self.user_stats.get(user_id, self.global_stats)

    def item_vector(self, item_id: int) -> np.ndarray:
        return self.item_stats.get(item_id, self.global_stats)


def _grouped_stats(keys: np.ndarray, values: np.ndarray) -> dict[int, np.ndarray]:
    order = np.argsort(keys, kind="stable")
    keys_sorted = keys[order]
    values_sorted = values[order]
    uniq, starts = np.unique(keys_sorted, return_index=True)
    bounds = np.append(starts, len(keys_sorted))
    return {
        int(k): _stats_vector(values_sorted[bounds[j]:bounds[j + 1]])
        for j, k in enumerate(uniq)
    }


def compute_ef_stats(train: RatingTable) -> EFStats:
    """Statistics over training-fold ratings only; fallbacks use all of them."""
    if train.n == 0:
        raise DataError("cannot compute rating statistics from an empty training split")
    return EFStats(
        user_stats=_grouped_stats(train.users, train.ratings),
        item_stats=_grouped_stats(train.items, train.ratings),
        global_stats=_stats_vector(train.ratings),
    )


# ---------------------------------------------------------------------------
# Feature tables
# ---------------------------------------------------------------------------

@dataclass
class FeatureTable:
    """Dense per-instance feature matrix aligned with rating order."""

    instance_ids: np.ndarray
    columns: list[str]
    matrix: np.ndarray
    standardization: dict[str, tuple[float, float]]
    user_ids: np.ndarray
    item_ids: np.ndarray
    train_idx: np.ndarray
    unmatched_zip_count: int = 0
    missing_year_count: int = 0

    @property
    def width(self) -> int:
        return self.matrix.shape[1]


def _zscore_fit(values: np.ndarray, train_idx: np.ndarray) -> tuple[float, float]:
    """Mean/std of the training partition; constant columns keep std=1."""
    train_vals = values[train_idx]
    mean = float(train_vals.mean())
    std = float(train_vals.std())  # population convention
    if std < 1e-12:
        std = 1.0
    return mean, std


def build_base_features(
    raw: RawDataset, income: IncomeTable, train_idx: np.ndarray | None = None
) -> FeatureTable:
    """Encode one row per rating instance: z-scored age/income/release-year,
    a year-missing indicator, gender and occupation one-hots, genre flags.

    Scaling parameters come from ``train_idx`` rows only (all rows when None).
    """
    n = raw.ratings.n
    if train_idx is None:
        train_idx = np.arange(n)
    train_idx = np.asarray(train_idx, dtype=np.int64)

    columns = schema.base_feature_names(raw.occupations, raw.genres)
    matrix = np.zeros((n, len(columns)), dtype=np.float64)
    col_of = {name: j for j, name in enumerate(columns)}

    # Per-user attribute vectors, indexed once then gathered per instance.
    uid_list = raw.ratings.users
    iid_list = raw.ratings.items

    age = np.empty(n)
    income_col = np.empty(n)
    unmatched = 0
    user_cache: dict[int, tuple[float, float, int, int]] = {}
    for uid, profile in raw.users.items():
        inc, matched = income.lookup(profile.zip)
        user_cache[uid] = (
            float(profile.age), inc,
            col_of[f"gender={profile.gender}"],
            col_of[f"occupation={profile.occupation}"],
        )
        if not matched:
            unmatched += 1
    for row, uid in enumerate(uid_list):
        a, inc, gcol, ocol = user_cache[int(uid)]
        age[row] = a
        income_col[row] = inc
        matrix[row, gcol] = 1.0
        matrix[row, ocol] = 1.0

    year = np.empty(n)
    year_missing = np.zeros(n)
    genre_start = col_of[f"genre={raw.genres[0]}"]
    item_cache = {
        iid: (np.nan if p.release_year is None else float(p.release_year), p.genres.astype(np.float64))
        for iid, p in raw.items.items()
    }
    for row, iid in enumerate(iid_list):
        y, flags = item_cache[int(iid)]
        year[row] = y
        matrix[row, genre_start:genre_start + len(flags)] = flags
    missing_mask = np.isnan(year)
    missing_count = 0
    if missing_mask.any():
        known_train_years = year[train_idx][~missing_mask[train_idx]]
        if len(known_train_years) == 0:
            raise DataError("all training instances have missing release years")
        median_year = float(np.median(known_train_years))
        year[missing_mask] = median_year
        year_missing[missing_mask] = 1.0
        missing_count = int(missing_mask.sum())
        logger.info("imputed %d missing release years with training median %.0f", missing_count, median_year)
    if unmatched:
        logger.info("%d users had no ZIP match; used global median income %.0f", unmatched, income.global_median)

    standardization: dict[str, tuple[float, float]] = {}
    for name, values in (("age", age), ("income", income_col), ("release_year", year)):
        mean, std = _zscore_fit(values, train_idx)
        standardization[name] = (mean, std)
        matrix[:, col_of[name]] = (values - mean) / std
    matrix[:, col_of["release_year_missing"]] = year_missing

    return FeatureTable(
        instance_ids=np.arange(n, dtype=np.int64),
        columns=columns,
        matrix=matrix,
        standardization=standardization,
        user_ids=uid_list.copy(),
        item_ids=iid_list.copy(),
        train_idx=train_idx,
        unmatched_zip_count=unmatched,
        missing_year_count=missing_count,
    )


def extend_features(base: FeatureTable, ef: EFStats) -> FeatureTable:
    """Append the 12 rating-statistic columns, z-scored with training params."""
    n = len(base.instance_ids)
    ef_cols = schema.ef_feature_names()
    extra = np.empty((n, len(ef_cols)), dtype=np.float64)

    user_vectors = {uid: ef.user_vector(uid) for uid in np.unique(base.user_ids)}
    item_vectors = {iid: ef.item_vector(iid) for iid in np.unique(base.item_ids)}
    for row in range(n):
        extra[row, :6] = user_vectors[int(base.user_ids[row])]
        extra[row, 6:] = item_vectors[int(base.item_ids[row])]

    standardization = dict(base.standardization)
    for j, name in enumerate(ef_cols):
        mean, std = _zscore_fit(extra[:, j], base.train_idx)
        standardization[name] = (mean, std)
        extra[:, j] = (extra[:, j] - mean) / std

    columns = base.columns + ef_cols
    expected = schema.extended_feature_names()
    if len(columns) != len(expected) and len(base.columns) == schema.BASE_WIDTH:
        raise schema.SchemaMismatchError(expected, len(columns))

    return FeatureTable(
        instance_ids=base.instance_ids,
        columns=columns,
        matrix=np.hstack([base.matrix, extra]),
        standardization=standardization,
        user_ids=base.user_ids,
        item_ids=base.item_ids,
        train_idx=base.train_idx,
        unmatched_zip_count=base.unmatched_zip_count,
        missing_year_count=base.missing_year_count,
    )


# ---------------------------------------------------------------------------
# Cross-validation folds
# ---------------------------------------------------------------------------

@dataclass
class FoldAssignment:
    n_folds: int
    fold_of: np.ndarray
    seed: int

    def train_idx(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)

    def test_idx(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)


def make_folds(n: int, k: int, seed: int) -> FoldAssignment:
    """Deterministic shuffled partition into k folds with sizes differing <= 1."""
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if k > n:
        raise ValueError(f"cannot split {n} instances into {k} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[perm] = np.arange(n) % k
    return FoldAssignment(n_folds=k, fold_of=fold_of, seed=seed)
