"""Cohort curation: clinical/scan table parsing, deterministic scan
selection, diagnostic group assignment, and BIDS tree materialization.

Tables use a simplified canonical schema whose column names match the
record fields; adapters for site-specific spreadsheets are an extension
point, not part of this module.
"""

import csv
import io
import re
import shutil
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    BadValue,
    CollisionAtDestination,
    DuplicateKey,
    EmptyCandidates,
    MissingColumn,
    MissingSource,
    MixedKey,
    NoBaseline,
    UnknownLabel,
)

DIAGNOSES = ("CN", "MCI", "AD")
AMYLOID_STATUSES = ("positive", "negative", "unknown")
MODALITIES = ("T1", "FDG", "AV45")
PET_MODALITIES = ("FDG", "AV45")
STUDY_PHASES = ("phase1", "phaseGO", "phase2")

BASE_GROUPS = ("AD", "MCIc", "MCInc", "CN", "excluded")
REFINED_GROUPS = ("AD-Ab+", "MCIc-Ab+", "MCIc-Ab-", "MCInc-Ab+", "MCInc-Ab-", "CN-Ab-")

#: the only (base group, amyloid status) pairs that define a refined group
_REFINEMENT = {
    ("AD", "positive"): "AD-Ab+",
    ("MCIc", "positive"): "MCIc-Ab+",
    ("MCIc", "negative"): "MCIc-Ab-",
    ("MCInc", "positive"): "MCInc-Ab+",
    ("MCInc", "negative"): "MCInc-Ab-",
    ("CN", "negative"): "CN-Ab-",
}

CLINICAL_COLUMNS = ("subject_id", "months_from_baseline", "diagnosis", "amyloid_status")
SCAN_COLUMNS = (
    "subject_id",
    "months_from_baseline",
    "modality",
    "gradwarp",
    "b1_corrected",
    "quality_rank",
    "field_strength_tesla",
    "study_phase",
    "coregistered_averaged",
    "source_path",
    "scan_uid",
)

DEFAULT_HORIZON_MONTHS = 36

PARTICIPANTS_HEADER = "participant_id\tgroup\tamyloid"


@dataclass(frozen=True)
class ClinicalRecord:
    subject_id: str
    months_from_baseline: int
    diagnosis: str
    amyloid_status: str = "unknown"


@dataclass(frozen=True)
class ScanRecord:
    subject_id: str
    months_from_baseline: int
    modality: str
    gradwarp: bool = False
    b1_corrected: bool = False
    quality_rank: int = 0
    field_strength_tesla: float = 1.5
    study_phase: str = "phase1"
    coregistered_averaged: bool = False
    source_path: str = ""
    scan_uid: str = ""


@dataclass(frozen=True)
class GroupLabel:
    base: str
    amyloid_refined: str | None = None

    def __post_init__(self):
        if self.base not in BASE_GROUPS:
            raise UnknownLabel(f"unknown base group {self.base!r}")
        if self.amyloid_refined is not None:
            if self.amyloid_refined not in REFINED_GROUPS:
                raise UnknownLabel(f"unknown refined group {self.amyloid_refined!r}")
            if not self.amyloid_refined.startswith(self.base + "-Ab"):
                raise UnknownLabel(
                    f"refined group {self.amyloid_refined!r} inconsistent with base {self.base!r}"
                )


@dataclass(frozen=True)
class ManifestEntry:
    subject_id: str
    label: GroupLabel
    amyloid_status: str
    scans: dict = field(default_factory=dict)  # modality -> ScanRecord


@dataclass(frozen=True)
class CohortManifest:
    entries: tuple
    horizon_months: int = DEFAULT_HORIZON_MONTHS

    def __post_init__(self):
        ids = [e.subject_id for e in self.entries]
        if len(ids) != len(set(ids)):
            raise DuplicateKey("manifest holds more than one entry for a subject")
        object.__setattr__(self, "entries", tuple(self.entries))

    def entry(self, subject_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.subject_id == subject_id:
                return e
        raise KeyError(subject_id)


# --- table parsing ------------------------------------------------------


def _header_index(header: list[str], required: tuple[str, ...]) -> dict[str, int]:
    positions = {}
    for name in required:
        if name not in header:
            raise MissingColumn(name)
        positions[name] = header.index(name)
    return positions


def _cell(row: list[str], pos: dict[str, int], column: str, line: int) -> str:
    idx = pos[column]
    if idx >= len(row):
        raise BadValue(line, column, "row has too few fields")
    return row[idx].strip()


def _parse_int(text: str, line: int, column: str, minimum: int | None = None) -> int:
    try:
        value = int(text)
    except ValueError:
        raise BadValue(line, column, f"not an integer: {text!r}") from None
    if minimum is not None and value < minimum:
        raise BadValue(line, column, f"must be >= {minimum}, got {value}")
    return value


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise BadValue(line, column, f"not a number: {text!r}") from None


def _parse_bool(text: str, line: int, column: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "true", "yes"):
        return True
    if lowered in ("0", "false", "no"):
        return False
    raise BadValue(line, column, f"not a boolean: {text!r}")


def _parse_choice(text: str, line: int, column: str, choices: tuple[str, ...]) -> str:
    if text not in choices:
        raise BadValue(line, column, f"expected one of {choices}, got {text!r}")
    return text


def _read_rows(text: str, required: tuple[str, ...]):
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MissingColumn(required[0]) from None
    pos = _header_index([h.strip() for h in header], required)
    # line numbers are 1-based and include the header line
    for line, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        yield line, row, pos


def parse_clinical_table(text: str) -> list[ClinicalRecord]:
    """Parse the clinical visits table; one record per (subject, month)."""
    records = []
    seen = set()
    for line, row, pos in _read_rows(text, CLINICAL_COLUMNS):
        rec = ClinicalRecord(
            subject_id=_cell(row, pos, "subject_id", line),
            months_from_baseline=_parse_int(
                _cell(row, pos, "months_from_baseline", line), line, "months_from_baseline", 0
            ),
            diagnosis=_parse_choice(
                _cell(row, pos, "diagnosis", line), line, "diagnosis", DIAGNOSES
            ),
            amyloid_status=_parse_choice(
                _cell(row, pos, "amyloid_status", line), line, "amyloid_status", AMYLOID_STATUSES
            ),
        )
        key = (rec.subject_id, rec.months_from_baseline)
        if key in seen:
            raise DuplicateKey(f"duplicate clinical record for subject/month {key} at line {line}")
        seen.add(key)
        records.append(rec)
    return records


def parse_scan_table(text: str) -> list[ScanRecord]:
    """Parse the scan inventory table; scan_uid must be unique."""
    records = []
    seen = set()
    for line, row, pos in _read_rows(text, SCAN_COLUMNS):
        rec = ScanRecord(
            subject_id=_cell(row, pos, "subject_id", line),
            months_from_baseline=_parse_int(
                _cell(row, pos, "months_from_baseline", line), line, "months_from_baseline", 0
            ),
            modality=_parse_choice(_cell(row, pos, "modality", line), line, "modality", MODALITIES),
            gradwarp=_parse_bool(_cell(row, pos, "gradwarp", line), line, "gradwarp"),
            b1_corrected=_parse_bool(
                _cell(row, pos, "b1_corrected", line), line, "b1_corrected"
            ),
            quality_rank=_parse_int(
                _cell(row, pos, "quality_rank", line), line, "quality_rank"
            ),
            field_strength_tesla=_parse_float(
                _cell(row, pos, "field_strength_tesla", line), line, "field_strength_tesla"
            ),
            study_phase=_parse_choice(
                _cell(row, pos, "study_phase", line), line, "study_phase", STUDY_PHASES
            ),
            coregistered_averaged=_parse_bool(
                _cell(row, pos, "coregistered_averaged", line), line, "coregistered_averaged"
            ),
            source_path=_cell(row, pos, "source_path", line),
            scan_uid=_cell(row, pos, "scan_uid", line),
        )
        if rec.scan_uid in seen:
            raise DuplicateKey(f"duplicate scan_uid {rec.scan_uid!r} at line {line}")
        seen.add(rec.scan_uid)
        records.append(rec)
    return records


# --- scan selection -----------------------------------------------------

_T1_RULES = (
    "gradwarp+B1 preferred",
    "higher quality preferred",
    "1.5T preferred for phase1",
    "smallest scan uid",
)
_PET_RULES = (
    "coregistered averaged preferred",
    "higher quality preferred",
    "smallest scan uid",
)


def _t1_key(scan: ScanRecord):
    prefer_15t = scan.study_phase == "phase1" and abs(scan.field_strength_tesla - 1.5) < 1e-6
    return (
        0 if (scan.gradwarp and scan.b1_corrected) else 1,
        scan.quality_rank,
        0 if prefer_15t else 1,
        scan.scan_uid,
    )


def _pet_key(scan: ScanRecord):
    return (
        0 if scan.coregistered_averaged else 1,
        scan.quality_rank,
        scan.scan_uid,
    )


def select_scan_with_rule(candidates: list[ScanRecord]) -> tuple[ScanRecord, str]:
    """Pick the preferred scan and report which preference rule decided.

    The ranking is a total lexicographic order, so the result is invariant
    under permutation of the candidate list.
    """
    if not candidates:
        raise EmptyCandidates("no candidate scans")
    keys = {(c.subject_id, c.months_from_baseline, c.modality) for c in candidates}
    if len(keys) != 1:
        raise MixedKey(f"candidates span multiple subject/month/modality keys: {sorted(keys)}")
    modality = candidates[0].modality
    key_fn = _t1_key if modality == "T1" else _pet_key
    rules = _T1_RULES if modality == "T1" else _PET_RULES

    ranked = sorted(candidates, key=key_fn)
    winner = ranked[0]
    if len(ranked) == 1:
        return winner, "single candidate"
    wk, rk = key_fn(winner), key_fn(ranked[1])
    for level, (a, b) in enumerate(zip(wk, rk)):
        if a != b:
            return winner, rules[level]
    return winner, rules[-1]


def select_scan(candidates: list[ScanRecord]) -> ScanRecord:
    return select_scan_with_rule(candidates)[0]


# --- group assignment ---------------------------------------------------


def assign_group(
    records: list[ClinicalRecord], horizon_months: int = DEFAULT_HORIZON_MONTHS
) -> str:
    """Assign the follow-up-horizon diagnostic group from one subject's visits.

    Baseline AD is AD. Baseline CN stays CN unless any visit within the
    horizon shows MCI or AD (then excluded). Baseline MCI becomes MCIc on
    any AD diagnosis within the horizon, MCInc when follow-up reaches the
    horizon without conversion, and excluded when follow-up is too short.
    """
    baseline = [r for r in records if r.months_from_baseline == 0]
    if not baseline:
        raise NoBaseline("no record at month 0")
    if len(baseline) > 1:
        raise DuplicateKey("multiple records at month 0")
    start = baseline[0].diagnosis

    within = [r for r in records if r.months_from_baseline <= horizon_months]
    if start == "AD":
        return "AD"
    if start == "CN":
        worsened = any(r.diagnosis in ("MCI", "AD") for r in within)
        return "excluded" if worsened else "CN"
    # baseline MCI
    if any(r.diagnosis == "AD" for r in within):
        return "MCIc"
    last_visit = max(r.months_from_baseline for r in records)
    if last_visit >= horizon_months:
        return "MCInc"
    return "excluded"


def refine_with_amyloid(base: str, amyloid_status: str) -> str | None:
    """Map (base group, amyloid status) onto the refined group whitelist."""
    if base not in BASE_GROUPS:
        raise UnknownLabel(f"unknown base group {base!r}")
    if amyloid_status not in AMYLOID_STATUSES:
        raise UnknownLabel(f"unknown amyloid status {amyloid_status!r}")
    return _REFINEMENT.get((base, amyloid_status))


def build_manifest(
    clinical: list[ClinicalRecord],
    scans: list[ScanRecord],
    horizon_months: int = DEFAULT_HORIZON_MONTHS,
    baseline_month: int = 0,
) -> tuple[CohortManifest, list[tuple[str, str, str, str]]]:
    """Combine parsed tables into a manifest of baseline-scan selections.

    Returns the manifest plus a selection log of
    (subject, modality, winning scan uid, rule that fired), one row per
    selected scan, for the conversion log.
    """
    by_subject: dict[str, list[ClinicalRecord]] = {}
    for rec in clinical:
        by_subject.setdefault(rec.subject_id, []).append(rec)

    scan_pool: dict[tuple[str, str], list[ScanRecord]] = {}
    for scan in scans:
        if scan.months_from_baseline == baseline_month:
            scan_pool.setdefault((scan.subject_id, scan.modality), []).append(scan)

    entries = []
    decisions = []
    for subject_id in sorted(by_subject):
        records = by_subject[subject_id]
        if not any(r.months_from_baseline == 0 for r in records):
            continue
        base = assign_group(records, horizon_months)
        status = next(r.amyloid_status for r in records if r.months_from_baseline == 0)
        label = GroupLabel(base=base, amyloid_refined=refine_with_amyloid(base, status))
        selected = {}
        for modality in MODALITIES:
            candidates = scan_pool.get((subject_id, modality))
            if not candidates:
                continue
            winner, rule = select_scan_with_rule(candidates)
            selected[modality] = winner
            decisions.append((subject_id, modality, winner.scan_uid, rule))
        entries.append(
            ManifestEntry(
                subject_id=subject_id, label=label, amyloid_status=status, scans=selected
            )
        )
    manifest = CohortManifest(entries=tuple(entries), horizon_months=horizon_months)
    return manifest, decisions


# --- BIDS materialization -----------------------------------------------


def _bids_subject(subject_id: str) -> str:
    return re.sub(r"[^a-zA-Z0-9]", "", subject_id)


def bids_relative_path(subject_id: str, month: int, modality: str) -> str:
    """BIDS path of one image, relative to the dataset root."""
    sub = f"sub-{_bids_subject(subject_id)}"
    ses = f"ses-M{month:02d}"
    if modality == "T1":
        return f"{sub}/{ses}/anat/{sub}_{ses}_T1w.nii"
    acq = modality.lower()
    return f"{sub}/{ses}/pet/{sub}_{ses}_acq-{acq}_pet.nii"


def build_bids(manifest: CohortManifest, source_root, dest_root) -> dict:
    """Materialize a BIDS tree from the manifest's selected scans.

    Copies image bytes unchanged and writes a participants table. Two runs
    over identical inputs produce identical file lists and bytes.
    """
    source_root = Path(source_root)
    dest_root = Path(dest_root)

    planned: dict[str, ScanRecord] = {}
    for entry in sorted(manifest.entries, key=lambda e: e.subject_id):
        for modality in sorted(entry.scans):
            scan = entry.scans[modality]
            rel = bids_relative_path(entry.subject_id, scan.months_from_baseline, modality)
            if rel in planned:
                raise CollisionAtDestination(f"two scans map to {rel}")
            planned[rel] = scan

    for rel, scan in planned.items():
        src = source_root / scan.source_path
        if not src.is_file():
            raise MissingSource(src)

    written = []
    for rel, scan in sorted(planned.items()):
        dest = dest_root / rel
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(source_root / scan.source_path, dest)
        written.append(rel)

    dest_root.mkdir(parents=True, exist_ok=True)
    lines = [PARTICIPANTS_HEADER]
    for entry in sorted(manifest.entries, key=lambda e: e.subject_id):
        lines.append(
            f"sub-{_bids_subject(entry.subject_id)}\t{entry.label.base}\t{entry.amyloid_status}"
        )
    (dest_root / "participants.tsv").write_text("\n".join(lines) + "\n")

    groups: dict[str, int] = {}
    for entry in manifest.entries:
        groups[entry.label.base] = groups.get(entry.label.base, 0) + 1
    return {"n_subjects": len(manifest.entries), "files_written": written, "groups": groups}


def manifest_from_bids(bids_root, horizon_months: int = DEFAULT_HORIZON_MONTHS) -> CohortManifest:
    """Rebuild a minimal manifest from a BIDS tree written by build_bids."""
    bids_root = Path(bids_root)
    participants = bids_root / "participants.tsv"
    if not participants.is_file():
        raise MissingSource(participants)
    entries = []
    text = participants.read_text().splitlines()
    if not text or text[0] != PARTICIPANTS_HEADER:
        raise BadValue(1, "participants.tsv", "unexpected header")
    for line_no, line in enumerate(text[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 3:
            raise BadValue(line_no, "participants.tsv", "expected 3 tab-separated fields")
        participant, base, status = parts
        subject_id = participant.removeprefix("sub-")
        if base not in BASE_GROUPS:
            raise BadValue(line_no, "group", f"unknown group {base!r}")
        if status not in AMYLOID_STATUSES:
            raise BadValue(line_no, "amyloid", f"unknown status {status!r}")
        scans = {}
        for modality in MODALITIES:
            rel = bids_relative_path(subject_id, 0, modality)
            path = bids_root / rel
            if path.is_file():
                scans[modality] = ScanRecord(
                    subject_id=subject_id,
                    months_from_baseline=0,
                    modality=modality,
                    source_path=rel,
                    scan_uid=path.name,
                )
        label = GroupLabel(base=base, amyloid_refined=refine_with_amyloid(base, status))
        entries.append(
            ManifestEntry(
                subject_id=subject_id, label=label, amyloid_status=status, scans=scans
            )
        )
    return CohortManifest(entries=tuple(entries), horizon_months=horizon_months)


# --- subject selection --------------------------------------------------


def _matches(entry: ManifestEntry, label: str) -> bool:
    if label in BASE_GROUPS:
        return entry.label.base == label
    return entry.label.amyloid_refined == label


def select_subjects(
    manifest: CohortManifest,
    task: tuple[str, str],
    required_modalities: set[str] | frozenset[str] = frozenset(),
) -> tuple[list[str], list[str]]:
    """List the subjects of each task group that carry all required modalities."""
    label_a, label_b = task
    for label in (label_a, label_b):
        if label not in BASE_GROUPS and label not in REFINED_GROUPS:
            raise UnknownLabel(f"unknown group label {label!r}")
    if label_a == label_b:
        raise UnknownLabel("task labels must be distinct")
    required = set(required_modalities)
    for modality in required:
        if modality not in MODALITIES:
            raise UnknownLabel(f"unknown modality {modality!r}")

    def eligible(entry: ManifestEntry) -> bool:
        return required.issubset(entry.scans.keys())

    group_a = sorted(
        e.subject_id for e in manifest.entries if _matches(e, label_a) and eligible(e)
    )
    group_b = sorted(
        e.subject_id for e in manifest.entries if _matches(e, label_b) and eligible(e)
    )
    return group_a, group_b
