"""Closed label vocabularies for conversation-level extraction."""
from __future__ import annotations

OTHERS = "Others"

SYMPTOM_LABELS = (
    "Cardiovascular",
    "General",
    "Musculoskeletal",
    "Respiratory",
    "Endocrine",
    "Ear Nose Throat",
    "Eyes",
    "Gastrointestinal",
    "Genital",
    "Head",
    "Neurological",
    "Psychiatric",
    "Skin",
    "Urinary",
)

_PS = "DFCBM/Pharmacologic Substance/"
MEDICATION_LABELS = (
    "DFCBM/Chemical Modifier/Toxin",
    "DFCBM/Dietary Supplement",
    "DFCBM/Drug or Chemical by Structure",
    "DFCBM/Food or Food Product",
    "DFCBM/Industrial Aid",
    "DFCBM/Natural Product",
    _PS + "Adjuvant",
    _PS + "AA Blood or Body Fluid",
    _PS + "AA Cardiovascular System",
    _PS + "AA Digestive System or Metabolism",
    _PS + "AA Integumentary System",
    _PS + "AA Musculoskeletal System",
    _PS + "AA Nervous System",
    _PS + "AA Organs of Special Senses",
    _PS + "AA Respiratory System",
    _PS + "Anti-Infective Agent",
    _PS + "Antineoplastic Agent",
    _PS + "Biological Agent",
    _PS + "Cation Channel Blocker",
    _PS + "Chemopreventive Agent",
    _PS + "Combination Medication",
    _PS + "Endothelin Receptor Antagonist",
    _PS + "Enzyme Inhibitor",
    _PS + "Hormone Therapy Agent",
    _PS + "Immunotherapeutic Agent",
    _PS + "Prostaglandin Analogue",
    _PS + "Protective Agent",
    _PS + "Protein Synthesis Inhibitor",
    "DFCBM/Physiology-Regulatory Factor",
    "Activity/Clinical or Research Activity/Intervention or Procedure",
    "Manufactured Object/Diagnostic, Therapeutic, or Research Equipment",
    OTHERS,
)

COMPLAINT_LABELS = (
    "General",
    "Disorder of hematopoietic structure",
    "Disorder of integument, immune system, endocrine",
    "Disorder of musculoskeletal system",
    "Disorder of digestive system",
    "Disorder of the genitourinary system",
    "Disorder of respiratory system",
    "Disorder of breast",
    "Disorder of nervous system",
    "Disorder of cardiovascular system",
    OTHERS,
)

EXTRACTION_LABELS = {"SYM": SYMPTOM_LABELS, "MED": MEDICATION_LABELS, "COM": COMPLAINT_LABELS}

# tasks whose ungrouped concepts fall back to OTHERS; ungrouped symptoms are dropped
OTHERS_TASKS = ("MED", "COM")

SEMANTIC_TYPES = (
    "Sign or Symptom",
    "Pharmacologic Substance",
    "Disease or Syndrome",
    "Finding",
    "Therapeutic or Preventive Procedure",
    "Organic Chemical",
    "Food",
    "Vitamin",
    "Medical Device",
    "Health Care Activity",
    "Mental or Behavioral Dysfunction",
    "Neoplastic Process",
    "Immunologic Factor",
    "Hormone",
)
# size of the semantic-type embedding table; the full UMLS network has 127 types
N_SEMANTIC_TYPES = 127


def label_map(name: str = "default") -> dict:
    if name != "default":
        raise KeyError(f"unknown label map {name!r}")
    return {task: labels for task, labels in EXTRACTION_LABELS.items()}


def resolve_label(task: str, label: str, labels=None):
    """Map a dictionary label column to a task label, or None when dropped."""
    labels = EXTRACTION_LABELS[task] if labels is None else labels
    if label in labels:
        return label
    if task in OTHERS_TASKS:
        return OTHERS
    return None
