"""File formats: SD/XYZ structures, labels, manifests, featurization, results."""

from marcel.io.dataset import load_dataset, read_labels, sample_listing
from marcel.io.features import ATOM_COLUMNS, BOND_COLUMNS, FeatureMatrices, featurize
from marcel.io.manifest import DatasetManifest, load_manifest, save_manifest
from marcel.io.results import RESULT_KEYS, ExperimentRecord, read_results, write_results
from marcel.io.sdf import format_molfile, parse_sdf, write_sdf
from marcel.io.xyz import energy_from_comment, parse_xyz

__all__ = [
    "ATOM_COLUMNS", "BOND_COLUMNS", "DatasetManifest", "ExperimentRecord", "FeatureMatrices",
    "RESULT_KEYS", "energy_from_comment", "featurize", "format_molfile", "load_dataset",
    "load_manifest", "parse_sdf", "parse_xyz", "read_labels", "read_results", "sample_listing",
    "save_manifest", "write_results", "write_sdf",
]
