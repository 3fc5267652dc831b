"""V2000 molfile / SD file reading and writing.

Only the V2000 connection table is supported; V3000 records are rejected.
Each record yields ``(Molecule, Conformer, properties)`` where ``properties``
holds the ``> <tag>`` data items as strings.
"""

from __future__ import annotations

import io
import os
import re
from typing import IO, Iterable, Iterator, Union

from marcel import elements
from marcel.chem import Conformer, Molecule, build_molecule
from marcel.errors import DataError, MissingProperty, ParseError

Source = Union[bytes, str, os.PathLike, IO]

_BOND_ORDERS = {1: "SINGLE", 2: "DOUBLE", 3: "TRIPLE", 4: "AROMATIC"}
_BOND_CODES = {v: k for k, v in _BOND_ORDERS.items()}
# atom-block charge field codes; 4 marks a doublet radical
_CHARGE_CODES = {0: 0, 1: 3, 2: 2, 3: 1, 4: 0, 5: -1, 6: -2, 7: -3}
_PARITY_TAGS = {0: "CHI_UNSPECIFIED", 1: "CHI_TETRAHEDRAL_CW", 2: "CHI_TETRAHEDRAL_CCW", 3: "CHI_UNSPECIFIED"}
_TAG_PARITY = {"CHI_TETRAHEDRAL_CW": 1, "CHI_TETRAHEDRAL_CCW": 2}
# M  RAD multiplicity -> unpaired electrons
_RADICAL_ELECTRONS = {0: 0, 1: 2, 2: 1, 3: 2}
_TAG_RE = re.compile(r"^>.*?<([^>]*)>")


def _read_text(source: Source) -> str:
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif isinstance(source, str) and ("\n" in source or source == ""):
        return source
    elif isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()
        if isinstance(data, str):
            return data
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        return data.decode("latin-1")


def _split_records(lines: list[str]) -> Iterator[tuple[int, list[str]]]:
    start = 0
    for k, line in enumerate(lines):
        if line.startswith("$$$$"):
            yield start, lines[start:k]
            start = k + 1
    tail = lines[start:]
    if any(line.strip() for line in tail):
        yield start, tail


def _int_field(line: str, lo: int, hi: int, default: int = 0) -> int:
    text = line[lo:hi].strip()
    return int(text) if text else default


def _parse_atom_line(line: str, lineno: int):
    try:
        x, y, z = float(line[0:10]), float(line[10:20]), float(line[20:30])
        sym = line[31:34].strip()
        charge_code = _int_field(line, 36, 39)
        parity = _int_field(line, 39, 42)
    except ValueError:
        # tolerate whitespace-delimited writers
        parts = line.split()
        if len(parts) < 4:
            raise ParseError(f"malformed atom line {line!r}", lineno) from None
        try:
            x, y, z = float(parts[0]), float(parts[1]), float(parts[2])
            charge_code = int(parts[5]) if len(parts) > 5 else 0
            parity = int(parts[6]) if len(parts) > 6 else 0
        except ValueError:
            raise ParseError(f"malformed atom line {line!r}", lineno) from None
        sym = parts[3]
    if not elements.is_element(sym):
        raise ParseError(f"unknown element symbol {sym!r}", lineno)
    if charge_code not in _CHARGE_CODES:
        raise ParseError(f"invalid charge code {charge_code}", lineno)
    return sym, (x, y, z), charge_code, parity


def _parse_bond_line(line: str, lineno: int, n_atoms: int):
    try:
        a, b, kind = int(line[0:3]), int(line[3:6]), int(line[6:9])
        stereo = _int_field(line, 9, 12)
    except ValueError:
        parts = line.split()
        if len(parts) < 3:
            raise ParseError(f"malformed bond line {line!r}", lineno) from None
        try:
            a, b, kind = int(parts[0]), int(parts[1]), int(parts[2])
            stereo = int(parts[3]) if len(parts) > 3 else 0
        except ValueError:
            raise ParseError(f"malformed bond line {line!r}", lineno) from None
    if not (1 <= a <= n_atoms and 1 <= b <= n_atoms):
        raise ParseError(f"bond references atom outside 1..{n_atoms}", lineno)
    if kind not in _BOND_ORDERS:
        raise ParseError(f"unsupported bond type {kind}", lineno)
    order = _BOND_ORDERS[kind]
    if order == "DOUBLE" and stereo == 3:
        tag = "STEREOANY"
    else:
        tag = "STEREONONE"
    return a - 1, b - 1, order, tag


def _parse_record(lines: list[str], offset: int, energy_tag: str | None, require_energy: bool):
    if len(lines) < 4:
        raise ParseError("record shorter than the molfile header", offset + len(lines))
    title = lines[0].strip()
    counts = lines[3]
    if "V3000" in counts:
        raise ParseError("V3000 molfiles are not supported", offset + 4)
    try:
        n_atoms = int(counts[0:3])
        n_bonds = int(counts[3:6])
    except ValueError:
        raise ParseError(f"malformed counts line {counts!r}", offset + 4) from None
    if n_atoms < 1:
        raise ParseError("counts line declares no atoms", offset + 4)
    atom_end = 4 + n_atoms
    bond_end = atom_end + n_bonds
    if len(lines) < bond_end:
        raise ParseError(
            f"declared {n_atoms} atoms and {n_bonds} bonds but record ends early", offset + len(lines)
        )

    symbols, coords, charges, parities = [], [], [], []
    radicals = [0] * n_atoms
    for k in range(4, atom_end):
        line = lines[k]
        if _looks_like_bond_or_property(line):
            raise ParseError("atom block shorter than the declared atom count", offset + k + 1)
        sym, xyz, code, parity = _parse_atom_line(line, offset + k + 1)
        symbols.append(sym)
        coords.append(xyz)
        charges.append(_CHARGE_CODES[code])
        if code == 4:
            radicals[k - 4] = 1
        parities.append(_PARITY_TAGS.get(parity, "CHI_UNSPECIFIED"))

    bonds = []
    for k in range(atom_end, bond_end):
        if lines[k].startswith("M  "):
            raise ParseError("bond block shorter than the declared bond count", offset + k + 1)
        bonds.append(_parse_bond_line(lines[k], offset + k + 1, n_atoms))

    k = bond_end
    saw_chg = False
    while k < len(lines):
        line = lines[k]
        if line.startswith("M  END"):
            k += 1
            break
        if line.startswith("M  CHG") or line.startswith("M  RAD"):
            entries = line[6:].split()
            try:
                count = int(entries[0])
                pairs = [(int(entries[1 + 2 * m]), int(entries[2 + 2 * m])) for m in range(count)]
            except (ValueError, IndexError):
                raise ParseError(f"malformed property line {line!r}", offset + k + 1) from None
            if line.startswith("M  CHG") and not saw_chg:
                # the first CHG line resets every atom-block charge
                charges = [0] * n_atoms
                saw_chg = True
            for atom, value in pairs:
                if not 1 <= atom <= n_atoms:
                    raise ParseError(f"property references atom {atom}", offset + k + 1)
                if line.startswith("M  CHG"):
                    charges[atom - 1] = value
                else:
                    radicals[atom - 1] = _RADICAL_ELECTRONS.get(value, 0)
        elif line.startswith(">"):
            break
        k += 1

    props: dict[str, str] = {}
    while k < len(lines):
        m = _TAG_RE.match(lines[k])
        if not m:
            k += 1
            continue
        tag = m.group(1)
        k += 1
        value_lines = []
        while k < len(lines) and lines[k].strip() != "":
            value_lines.append(lines[k].rstrip())
            k += 1
        props[tag] = "\n".join(value_lines)

    try:
        molecule = build_molecule(symbols, bonds, charges=charges, chiral_tags=parities,
                                  radicals=radicals, identifier=title)
    except DataError as exc:
        raise ParseError(str(exc), offset + 1) from None

    energy = None
    if energy_tag is not None and energy_tag in props:
        try:
            energy = float(props[energy_tag].split()[0])
        except (ValueError, IndexError):
            raise ParseError(f"energy tag {energy_tag!r} is not a number", offset + 1) from None
    elif require_energy:
        raise MissingProperty(f"record {title!r} (line {offset + 1}) lacks energy tag {energy_tag!r}")
    return molecule, Conformer(coords, energy, props), props


def _looks_like_bond_or_property(line: str) -> bool:
    return line.startswith("M  ")


def parse_sdf(source: Source, energy_tag: str | None = "energy", require_energy: bool = False):
    """Parse every record of an SD file.

    ``source`` may be bytes, text, a path or an open file object.
    Returns a list of ``(Molecule, Conformer, properties)`` in file order.
    """
    text = _read_text(source)
    lines = text.splitlines()
    return [
        _parse_record(rec, offset, energy_tag, require_energy)
        for offset, rec in _split_records(lines)
    ]


def format_molfile(molecule: Molecule, conformer: Conformer, properties: dict | None = None,
                   title: str | None = None) -> str:
    """Render one SD record (molfile + data items + ``$$$$``)."""
    out = [title if title is not None else molecule.identifier, "  marcel          3D", ""]
    out.append(f"{molecule.num_atoms:3d}{len(molecule.bonds):3d}  0  0  0  0  0  0  0  0999 V2000")
    charged, radical = [], []
    for atom, (x, y, z) in zip(molecule.atoms, conformer.coordinates):
        parity = _TAG_PARITY.get(atom.chiral_tag, 0)
        out.append(
            f"{x:10.4f}{y:10.4f}{z:10.4f} {atom.element:<3} 0  0{parity:3d}  0  0  0  0  0  0  0  0  0"
        )
    for k, atom in enumerate(molecule.atoms):
        if atom.formal_charge:
            charged.append((k + 1, atom.formal_charge))
        if atom.num_radical_electrons:
            radical.append((k + 1, 2 if atom.num_radical_electrons == 1 else 3))
    for b in molecule.bonds:
        stereo = 3 if b.stereo == "STEREOANY" else 0
        out.append(f"{b.i + 1:3d}{b.j + 1:3d}{_BOND_CODES[b.order]:3d}{stereo:3d}")
    for label, entries in (("CHG", charged), ("RAD", radical)):
        for start in range(0, len(entries), 8):
            chunk = entries[start:start + 8]
            out.append(f"M  {label}{len(chunk):3d}" + "".join(f" {a:3d} {v:3d}" for a, v in chunk))
    out.append("M  END")
    for tag, value in (properties or {}).items():
        out.append(f">  <{tag}>")
        out.append(str(value))
        out.append("")
    out.append("$$$$")
    return "\n".join(out) + "\n"


def write_sdf(records: Iterable[tuple], sink) -> None:
    """Write ``(Molecule, Conformer[, properties])`` tuples to a path or text stream."""
    chunks = []
    for rec in records:
        mol, conf = rec[0], rec[1]
        props = rec[2] if len(rec) > 2 else dict(conf.properties)
        chunks.append(format_molfile(mol, conf, props))
    text = "".join(chunks)
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w") as fh:
            fh.write(text)
    elif isinstance(sink, io.TextIOBase) or hasattr(sink, "write"):
        sink.write(text)
    else:
        raise TypeError(f"cannot write to {sink!r}")
