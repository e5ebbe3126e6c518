"""Feature schema: fixed column names and widths for the instance feature matrix.

The base matrix holds the encoded demographic/item attributes (46 columns);
the extended matrix appends 12 per-user/per-item rating statistics for a
total of 58 columns.  Column order is part of the on-disk contract: cached
matrices, the schema file, and the feature models all rely on it.
"""

from __future__ import annotations

import json

SCHEMA_VERSION = 1

# MovieLens-100K vocabularies (u.occupation / u.genre).  Used as fallbacks
# when the vocab files are absent from a data directory.
OCCUPATIONS = (
    "administrator", "artist", "doctor", "educator", "engineer",
    "entertainment", "executive", "healthcare", "homemaker", "lawyer",
    "librarian", "marketing", "none", "other", "programmer", "retired",
    "salesman", "scientist", "student", "technician", "writer",
)

GENRES = (
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
)

GENDERS = ("M", "F")

EF_STAT_NAMES = ("mean", "std", "min", "max", "median", "count")

# Columns z-scored with training-partition parameters; everything else is 0/1.
CONTINUOUS_BASE = ("age", "income", "release_year")


def base_feature_names(occupations=OCCUPATIONS, genres=GENRES) -> list[str]:
    names = ["age", "income", "release_year", "release_year_missing"]
    names += [f"gender={g}" for g in GENDERS]
    names += [f"occupation={o}" for o in occupations]
    names += [f"genre={g}" for g in genres]
    return names


def ef_feature_names() -> list[str]:
    return [f"user_{s}" for s in EF_STAT_NAMES] + [f"item_{s}" for s in EF_STAT_NAMES]


def extended_feature_names(occupations=OCCUPATIONS, genres=GENRES) -> list[str]:
    return base_feature_names(occupations, genres) + ef_feature_names()


BASE_WIDTH = len(base_feature_names())        # 46
EXTENDED_WIDTH = len(extended_feature_names())  # 58


def write_schema_file(path, columns: list[str]) -> None:
    """Write the machine-readable schema (ordered column list)."""
    payload = {"schema_version": SCHEMA_VERSION, "n_columns": len(columns), "columns": list(columns)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_schema_file(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return list(payload["columns"])


class SchemaMismatchError(ValueError):
    """Feature matrix width disagrees with the declared schema."""

    def __init__(self, expected_columns, actual_width):
        self.expected_columns = list(expected_columns)
        self.actual_width = actual_width
        super().__init__(
            f"feature width {actual_width} != schema width {len(self.expected_columns)}; "
            f"schema: {self.expected_columns}"
        )
