from .data import CSV_COLUMNS, DatasetRecord, read_dataset_csv, split_dataset, write_dataset_csv
from .fingerprints import FP_BITS, morgan_fingerprint, tanimoto
from .mol import AROMATIC, Atom, Bond, Molecule, isomorphic
from .patterns import (
    FLUOROPHORE_PATTERN_TEXT,
    FLUOROPHORE_TEST_CLASSES,
    PatternAtom,
    PatternBond,
    PatternGraph,
    fluorophore_patterns,
    matches_any_fluorophore,
    parse_pattern,
    substructure_match,
)
from .scaffold import murcko_scaffold, scaffold_key
from .smiles import parse_smiles, write_smiles

__all__ = [
    "AROMATIC", "Atom", "Bond", "Molecule", "isomorphic",
    "parse_smiles", "write_smiles",
    "FP_BITS", "morgan_fingerprint", "tanimoto",
    "PatternAtom", "PatternBond", "PatternGraph", "parse_pattern", "substructure_match",
    "FLUOROPHORE_PATTERN_TEXT", "FLUOROPHORE_TEST_CLASSES",
    "fluorophore_patterns", "matches_any_fluorophore",
    "murcko_scaffold", "scaffold_key",
    "CSV_COLUMNS", "DatasetRecord", "read_dataset_csv", "write_dataset_csv", "split_dataset",
]
