"""Dataset records, CSV ingestion, and the three split strategies."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from ..errors import ContractError, DataError, ParseError
from ..rng import substream
from .mol import Molecule
from .patterns import FLUOROPHORE_TEST_CLASSES, matches_any_fluorophore
from .scaffold import scaffold_key
from .smiles import parse_smiles

CSV_COLUMNS = ["smiles", "solvent_smiles", "dielectric", "abs_nm", "emi_nm", "loge", "plqy"]

LABEL_FIELDS = ("abs_nm", "emi_nm", "loge", "plqy")


@dataclass
class DatasetRecord:
    smiles: str
    solvent_smiles: str | None = None
    dielectric: float | None = None
    abs_nm: float | None = None
    emi_nm: float | None = None
    loge: float | None = None
    plqy: float | None = None

    def labels_present(self) -> list[str]:
        return [f for f in LABEL_FIELDS if getattr(self, f) is not None]

    def validate(self, row: int = -1):
        where = f" (row {row})" if row >= 0 else ""
        if not self.labels_present():
            raise DataError(f"record has no labels{where}")
        for f in ("abs_nm", "emi_nm"):
            v = getattr(self, f)
            if v is not None and v <= 0:
                raise DataError(f"{f} must be positive, got {v}{where}")
        if self.plqy is not None and not (0.0 <= self.plqy <= 1.0):
            raise DataError(f"plqy must lie in [0, 1], got {self.plqy}{where}")

    def molecule(self) -> Molecule:
        return parse_smiles(self.smiles)

    def solvent(self) -> Molecule | None:
        if self.solvent_smiles is None:
            return None
        return parse_smiles(self.solvent_smiles)


def _parse_float(cell: str, column: str, row: int) -> float | None:
    cell = cell.strip()
    if cell == "":
        return None
    try:
        return float(cell)
    except ValueError:
        raise DataError(f"column {column!r} is not numeric at row {row}: {cell!r}") from None


def read_dataset_csv(path_or_text) -> list[DatasetRecord]:
    """Read the dataset CSV schema; header row is required, empty cell = missing."""
    if isinstance(path_or_text, io.StringIO):
        return _read_handle(path_or_text)
    try:
        with open(path_or_text, newline="", encoding="utf-8") as handle:
            return _read_handle(handle)
    except FileNotFoundError:
        raise DataError(f"dataset file not found: {path_or_text}") from None


def _read_handle(handle) -> list[DatasetRecord]:
    reader = csv.reader(handle)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("dataset CSV is empty") from None
    if [h.strip() for h in header] != CSV_COLUMNS:
        raise DataError(f"dataset CSV header must be {','.join(CSV_COLUMNS)!r}, got {','.join(header)!r}")
    records = []
    for row_i, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(CSV_COLUMNS):
            raise DataError(f"row {row_i} has {len(row)} cells, expected {len(CSV_COLUMNS)}")
        smiles = row[0].strip()
        if not smiles:
            raise DataError(f"row {row_i} has an empty smiles cell")
        rec = DatasetRecord(
            smiles=smiles,
            solvent_smiles=row[1].strip() or None,
            dielectric=_parse_float(row[2], "dielectric", row_i),
            abs_nm=_parse_float(row[3], "abs_nm", row_i),
            emi_nm=_parse_float(row[4], "emi_nm", row_i),
            loge=_parse_float(row[5], "loge", row_i),
            plqy=_parse_float(row[6], "plqy", row_i),
        )
        rec.validate(row_i)
        try:
            rec.molecule()
        except ParseError as exc:
            raise DataError(f"row {row_i}: unparseable smiles {smiles!r}: {exc}") from exc
        records.append(rec)
    return records


def write_dataset_csv(path, records: list[DatasetRecord]):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([
                rec.smiles,
                rec.solvent_smiles or "",
                *("" if getattr(rec, f) is None else repr(getattr(rec, f))
                  for f in ("dielectric", "abs_nm", "emi_nm", "loge", "plqy")),
            ])


# ---------------------------------------------------------------------------
# splits

_PARTITIONS = {2: ("train", "test"), 3: ("train", "val", "test")}


def _counts_for_ratios(n: int, ratios) -> list[int]:
    raw = [n * r for r in ratios]
    counts = [int(x) for x in raw]
    remainder = n - sum(counts)
    # largest fractional remainders take the leftover slots
    order = sorted(range(len(ratios)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def split_dataset(records: list[DatasetRecord], strategy: str, ratios, seed: int) -> list[str]:
    """Partition labels per record under random / scaffold / fluorophore splitting."""
    if not records:
        raise ContractError("cannot split an empty record list")
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) not in _PARTITIONS:
        raise ContractError("ratios must have 2 or 3 entries")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ContractError(f"ratios must sum to 1, got {sum(ratios)}")
    names = _PARTITIONS[len(ratios)]

    if strategy == "random":
        rng = substream(seed, "split", "random")
        order = rng.permutation(len(records))
        counts = _counts_for_ratios(len(records), ratios)
        labels = [""] * len(records)
        cursor = 0
        for name, count in zip(names, counts):
            for idx in order[cursor : cursor + count]:
                labels[int(idx)] = name
            cursor += count
        return labels

    if strategy == "scaffold":
        groups: dict[str, list[int]] = {}
        for i, rec in enumerate(records):
            groups.setdefault(scaffold_key(rec.molecule()), []).append(i)
        targets = _counts_for_ratios(len(records), ratios)
        filled = [0] * len(names)
        labels = [""] * len(records)
        ordered = sorted(groups.items(), key=lambda kv: (-len(kv[1]), kv[0]))
        for _, members in ordered:
            deficits = [targets[k] - filled[k] for k in range(len(names))]
            k = max(range(len(names)), key=lambda j: (deficits[j], -j))
            for idx in members:
                labels[idx] = names[k]
            filled[k] += len(members)
        return labels

    if strategy == "fluorophore":
        test_idx = []
        rest_idx = []
        for i, rec in enumerate(records):
            if matches_any_fluorophore(rec.molecule(), FLUOROPHORE_TEST_CLASSES):
                test_idx.append(i)
            else:
                rest_idx.append(i)
        labels = [""] * len(records)
        for i in test_idx:
            labels[i] = "test"
        head = names[:-1]  # remaining records never land in test
        head_ratios = ratios[:-1]
        total = sum(head_ratios)
        if total <= 0:
            raise ContractError("fluorophore split needs nonzero train ratio")
        head_ratios = [r / total for r in head_ratios]
        rng = substream(seed, "split", "fluorophore")
        order = rng.permutation(len(rest_idx))
        counts = _counts_for_ratios(len(rest_idx), head_ratios)
        cursor = 0
        for name, count in zip(head, counts):
            for j in order[cursor : cursor + count]:
                labels[rest_idx[int(j)]] = name
            cursor += count
        return labels

    raise ContractError(f"unknown split strategy {strategy!r}")
