"""
Persistent ESS cache
"""

import datetime
import os
from os import path
from typing import Optional

from peewee import (
    BooleanField,
    CharField,
    DateTimeField,
    FloatField,
    Model,
    SqliteDatabase,
    TextField,
)

import settings

PRAGMAS = {
    'journal_mode': 'wal',
    'cache_size': -1 * 64000,
    'foreign_keys': 1,
    'ignore_check_constrains': 0,
    'synchronous': 0
}

DB = SqliteDatabase(path.join(settings.data_location, 'hnoma.db'), pragmas=PRAGMAS)


class BaseModel(Model):
    """Base model class binding every table to :data:`DB`."""

    class Meta:
        database = DB


class EssCache(BaseModel):
    """One solved ESS, keyed by its rounded parameter tuple.

    Attributes:
        key (CharField): Canonical parameter key (see :func:`cache_key`). Unique.
        regime (CharField): Regime tag of the solution (``FixedA`` ... ``SnrScaled``).
        reward, sinr_threshold, rho1, rho2, gbar (FloatField): Game parameters.
        c (FloatField): Cost scale, null for fixed costs.
        C1, C2 (FloatField): Fixed costs, null for SNR-scaled costs.
        C3 (FloatField): Silence cost.
        x1, x2, x3 (FloatField): Solved state.
        r1, r2 (FloatField): Residuals of the defining equations.
        valid (BooleanField): Whether the solution is usable.
        reason (CharField): Why it is not, nullable.
        warnings (TextField): Solver warnings joined by ``"; "``.
        created_at (DateTimeField): When the row was stored.
    """

    key = CharField(unique=True)
    regime = CharField()
    reward = FloatField()
    sinr_threshold = FloatField()
    rho1 = FloatField()
    rho2 = FloatField()
    gbar = FloatField()
    c = FloatField(null=True)
    C1 = FloatField(null=True)
    C2 = FloatField(null=True)
    C3 = FloatField(default=0.0)
    x1 = FloatField()
    x2 = FloatField()
    x3 = FloatField()
    r1 = FloatField()
    r2 = FloatField()
    valid = BooleanField(default=True)
    reason = CharField(null=True)
    warnings = TextField(default='')
    created_at = DateTimeField(default=datetime.datetime.now)

    class Meta:
        table_name = 'ess_cache'


def cache_key(regime_family: str, *values: Optional[float]) -> str:
    """Join rounded parameter values into a stable key."""
    parts = [regime_family]
    for v in values:
        parts.append('-' if v is None else repr(round(float(v), 12)))
    return '|'.join(parts)


def init_db(db_path: Optional[str] = None) -> SqliteDatabase:
    """(Re)bind :data:`DB` to ``db_path`` and create the tables.

    Defaults to ``<settings.data_location>/hnoma.db``.
    """
    if db_path is None:
        db_path = path.join(getattr(settings, 'data_location', 'data'), 'hnoma.db')
    directory = path.dirname(db_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    if not DB.is_closed():
        DB.close()
    DB.init(db_path, pragmas=PRAGMAS)
    DB.connect(reuse_if_open=True)
    DB.create_tables([EssCache], safe=True)
    return DB
