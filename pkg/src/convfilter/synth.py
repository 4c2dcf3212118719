"""Seeded synthetic doctor-patient conversations.

Conversations are calibrated to published corpus statistics: per-conversation
category fractions (complaints 4.34%, symptoms 1.98%, medications 3.10%) and
mean relative first-mention positions (0.133, 0.321, 0.524).  Category
utterances name concepts from a ConceptDictionary, so conversation-level gold
extraction labels are consistent by construction.  Decoy utterances are
irrelevant small talk that still mention dictionary concepts.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, fields

from .corpus import TASKS, Conversation, FineLabelSet, SpeakerRole, Utterance
from .extract.dictionary import ConceptDictionary
from .extract.labels import EXTRACTION_LABELS, resolve_label
from .rng import Rng

DR, PT, OT = SpeakerRole.DOCTOR, SpeakerRole.PATIENT, SpeakerRole.OTHER


@dataclass(frozen=True)
class GeneratorProfile:
    mean_len: float = 60.0
    len_sigma: float = 0.6
    min_len: int = 3
    max_len: int = 600
    fraction_sym: float = 0.0198
    fraction_med: float = 0.0310
    fraction_com: float = 0.0434
    first_pos_sym: float = 0.321
    first_pos_med: float = 0.524
    first_pos_com: float = 0.133
    first_pos_std_sym: float = 0.057
    first_pos_std_med: float = 0.069
    first_pos_std_com: float = 0.043
    doctor_share_sym: float = 0.5
    doctor_share_med: float = 0.75
    doctor_share_com: float = 0.7
    doctor_share_irrelevant: float = 0.5
    other_share: float = 0.04
    # probability that a non-first category utterance names a concept
    named_followup: float = 0.5
    second_cluster: float = 0.25
    max_pool: int = 3
    decoy_fraction: float = 0.05
    decoy_weight_sym: float = 0.25
    decoy_weight_med: float = 0.5
    decoy_weight_com: float = 0.25

    def __post_init__(self):
        if self.min_len < 1 or self.max_len < self.min_len or self.mean_len <= 0:
            raise ValueError("invalid conversation length settings")
        fracs = [self.fraction(t) for t in TASKS]
        if any(f < 0 for f in fracs) or sum(fracs) > 1.0:
            raise ValueError("category fractions must be non-negative and sum to at most 1")
        for name in ("decoy_fraction", "named_followup", "second_cluster", "other_share",
                     "doctor_share_sym", "doctor_share_med", "doctor_share_com", "doctor_share_irrelevant"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.max_pool < 1:
            raise ValueError("max_pool must be >= 1")

    def fraction(self, task: str) -> float:
        return getattr(self, f"fraction_{task.lower()}")

    def first_pos(self, task: str) -> tuple[float, float]:
        t = task.lower()
        return getattr(self, f"first_pos_{t}"), getattr(self, f"first_pos_std_{t}")

    def doctor_share(self, task: str) -> float:
        return getattr(self, f"doctor_share_{task.lower()}")

    def decoy_weights(self) -> list[float]:
        return [getattr(self, f"decoy_weight_{t.lower()}") for t in TASKS]

    @property
    def irrelevant_fraction(self) -> float:
        return 1.0 - sum(self.fraction(t) for t in TASKS)

    def replace(self, **changes) -> "GeneratorProfile":
        return GeneratorProfile(**{**asdict(self), **changes})


PROFILES = {
    "desk": GeneratorProfile(),
    "full": GeneratorProfile(mean_len=225.0, min_len=3, max_len=1521),
    "clean": GeneratorProfile(decoy_fraction=0.0),
}


def profile_from_mapping(values: dict, base: GeneratorProfile | None = None) -> GeneratorProfile:
    base = base or GeneratorProfile()
    known = {f.name: f.type for f in fields(GeneratorProfile)}
    changes = {}
    for key, raw in values.items():
        if key not in known:
            raise KeyError(f"unknown profile key {key!r}")
        current = getattr(base, key)
        changes[key] = type(current)(float(raw)) if isinstance(current, int) else float(raw)
    return base.replace(**changes)


def load_profile(spec: str) -> GeneratorProfile:
    """A built-in profile name or an ini file with a [profile] section."""
    if spec in PROFILES:
        return PROFILES[spec]
    parser = configparser.ConfigParser()
    if not parser.read(spec):
        raise FileNotFoundError(f"profile {spec!r} is neither a built-in name nor a readable file")
    if not parser.has_section("profile"):
        raise KeyError(f"{spec}: missing [profile] section")
    base = PROFILES[parser["profile"].get("base", "desk")]
    values = {k: v for k, v in parser["profile"].items() if k != "base"}
    return profile_from_mapping(values, base)


NAMED = {
    "SYM": {
        DR: ["Have you been having any {x} lately?",
             "Any more {x} since the last visit?",
             "Last time I saw you, you were getting {x}. Is it still the case?",
             "How often do you notice the {x}?",
             "Tell me more about the {x}."],
        PT: ["I've been having some {x} lately.",
             "The {x} gets worse at night.",
             "I still get {x} when I walk up the stairs.",
             "My {x} started about two weeks ago.",
             "I noticed some {x} this morning."],
        OT: ["She has been complaining of {x} all week.",
             "He mentioned the {x} to me yesterday."],
    },
    "MED": {
        DR: ["I think I am going to ask you to try some {x}.",
             "Let's start you on {x} once a day.",
             "Keep taking the {x} twice a day.",
             "I'm going to increase your {x}.",
             "We'll send a prescription for {x} to your pharmacy."],
        PT: ["I've been taking the {x} every morning.",
             "I ran out of my {x} last week.",
             "The {x} seems to be helping.",
             "I take {x} with breakfast."],
        OT: ["I give him the {x} every night.",
             "She's been on {x} since spring."],
    },
    "COM": {
        DR: ["You're here today to follow up on your {x}.",
             "How has your {x} been since we last met?",
             "We talked about your {x} last time.",
             "Let's go over your {x} first."],
        PT: ["I'm here about my {x}.",
             "My {x} has been acting up again.",
             "I wanted to talk about the {x}."],
        OT: ["We came in because of her {x}.",
             "His {x} is what we wanted to ask about."],
    },
}

UNNAMED = {
    "SYM": {
        DR: ["What are you doing when that happens?",
             "Does it come and go, or is it constant?",
             "What makes it better or worse?",
             "On a scale of one to ten, how bad does it get?"],
        PT: ["Yes, I do.",
             "It comes and goes, mostly in the evening.",
             "It gets worse when I'm walking or doing exercise.",
             "It's been bothering me more than usual."],
        OT: ["It seems worse in the mornings."],
    },
    "MED": {
        DR: ["Try one tablet in the evening.",
             "It'll last up to six hours.",
             "Take it with food so it doesn't upset your stomach.",
             "If you like it, we can increase the dose.",
             "This is a patch you put on when it's bothering you."],
        PT: ["How many times a day should I take it?",
             "Do I take it before or after meals?",
             "The pharmacy said the dose changed."],
        OT: ["I fill the pill box for him every Sunday."],
    },
    "COM": {
        DR: ["Has it been better or worse since the last visit?",
             "Are you still seeing the specialist for that?",
             "That was the main reason for today's visit, right?"],
        PT: ["It's about the same as last time.",
             "It has been a little better, I think."],
        OT: ["That is why we came in today."],
    },
}

SMALL_TALK = {
    DR: ["Good morning.", "Let me pull up your chart.", "How was the drive in today?",
         "I'm here with {name}.", "Alright.", "Okay, sounds good.",
         "Do you have any other questions for me?", "Let me just type this in.",
         "We'll see you back in {num} months.", "Did you find parking okay?",
         "Let me wash my hands real quick.", "The nurse will be in shortly.",
         "Right, that makes sense.", "How is the family doing?", "Any plans for the weekend?",
         "If you like it, let me know.", "Let me check one thing on the computer."],
    PT: ["Good morning.", "Okay.", "Yes.", "Uh huh.", "Thank you, doctor.",
         "The traffic was terrible.", "{name} drove me today.",
         "We just got back from visiting my sister.", "I've been keeping busy with the garden.",
         "That sounds good.", "I don't have any other questions.", "Sorry, I didn't catch that.",
         "Yeah, that works for me.", "It was about {num} weeks ago, I think."],
    OT: ["I'm her daughter.", "Should I step out?", "I can write that down.",
         "Do you need the insurance card?", "{name} is parking the car."],
}

DECOY = {
    "MED": ["It's not rough on your stomach like, let's say, {x} would be.",
            "My neighbor swears by {x} for everything.",
            "I saw an ad for {x} on television.",
            "They were handing out coupons for {x} at the store.",
            "My brother used to take {x} years ago."],
    "SYM": ["My husband always complains of {x} when it rains.",
            "There was a poster about {x} in the waiting room.",
            "My friend had {x} after her trip."],
    "COM": ["My sister was just diagnosed with {x}.",
            "I read an article about {x} in a magazine.",
            "My uncle had {x} a long time ago."],
}

NAMES = ["Mrs. Alvarez", "Mr. Chen", "Ms. Okafor", "Mr. Novak", "Mrs. Patel", "my son", "my wife"]
NUMBERS = ["two", "three", "four", "six"]


def _conversation_length(profile: GeneratorProfile, rng: Rng) -> int:
    sigma = profile.len_sigma
    mu = math.log(profile.mean_len) - sigma * sigma / 2.0
    n = int(round(math.exp(rng.normal(mu, sigma))))
    return max(profile.min_len, min(profile.max_len, n))


def _cluster(start: int, k: int, n: int, taken: set, rng: Rng) -> list[int]:
    """k distinct positions starting at ``start`` with small forward gaps."""
    out = []
    p = start
    while len(out) < k and p < n:
        if p not in taken:
            out.append(p)
            taken.add(p)
        p += 1 + rng.below(3)
    # overflow: nearest free slots before start
    q = start - 1
    while len(out) < k and q >= 0:
        if q not in taken:
            out.append(q)
            taken.add(q)
        q -= 1
    return out


def _place(task: str, n: int, profile: GeneratorProfile, rng: Rng) -> list[int]:
    k = rng.binomial(n, profile.fraction(task))
    if k == 0:
        return []
    mean, std = profile.first_pos(task)
    rel = min(max(rng.normal(mean, std), 0.0), 1.0 - 1e-9)
    start = min(int(round(rel * n)), n - 1)
    taken: set = set()
    if k >= 2 and rng.bernoulli(profile.second_cluster):
        k1 = 1 + rng.below(k - 1)
        first = _cluster(start, k1, n, taken, rng)
        second_start = start + rng.below(n - start)
        return sorted(first + _cluster(second_start, k - len(first), n, taken, rng))
    return sorted(_cluster(start, k, n, taken, rng))


def _role(doctor_share: float, profile: GeneratorProfile, rng: Rng) -> SpeakerRole:
    u = rng.uniform()
    if u < profile.other_share:
        return OT
    return DR if rng.uniform() < doctor_share else PT


def _fill(template: str, rng: Rng, x: str | None = None) -> str:
    out = template
    if "{name}" in out:
        out = out.replace("{name}", rng.choice(NAMES))
    if "{num}" in out:
        out = out.replace("{num}", rng.choice(NUMBERS))
    if x is not None:
        out = out.replace("{x}", x)
    return out[0].upper() + out[1:]


def generate_conversation(conv_id: str, profile: GeneratorProfile, dictionary: ConceptDictionary,
                          rng: Rng, label_map=None) -> tuple[Conversation, list[bool]]:
    """One conversation plus a per-utterance decoy flag."""
    label_map = label_map or EXTRACTION_LABELS
    n = _conversation_length(profile, rng)
    labels_at: dict[int, list[str]] = {}
    for task in ("COM", "SYM", "MED"):
        for p in _place(task, n, profile, rng):
            labels_at.setdefault(p, []).append(task)

    pools = {}
    for task in TASKS:
        entries = dictionary.by_task(task)
        size = 1 + rng.below(min(profile.max_pool, len(entries)))
        pools[task] = [entries[i] for i in sorted(rng.shuffle(list(range(len(entries))))[:size])]
    all_by_task = {t: dictionary.by_task(t) for t in TASKS}

    gold = {t: set() for t in TASKS}
    seen_task = set()
    utterances, decoys = [], []
    for i in range(n):
        tasks = [t for t in TASKS if t in labels_at.get(i, [])]
        if tasks:
            role = _role(profile.doctor_share(tasks[0]), profile, rng)
            parts = []
            for task in tasks:
                named = task not in seen_task or rng.bernoulli(profile.named_followup)
                seen_task.add(task)
                if named:
                    entry = rng.choice(pools[task])
                    parts.append(_fill(rng.choice(NAMED[task][role]), rng, entry.surface_text))
                    lab = resolve_label(task, entry.label, label_map[task])
                    if lab is not None:
                        gold[task].add(lab)
                else:
                    parts.append(_fill(rng.choice(UNNAMED[task][role]), rng))
            text = " ".join(parts)
            decoy = False
        else:
            role = _role(profile.doctor_share_irrelevant, profile, rng)
            decoy = profile.decoy_fraction > 0 and rng.bernoulli(profile.decoy_fraction)
            if decoy:
                task = TASKS[rng.weighted_index(profile.decoy_weights())]
                entry = rng.choice(all_by_task[task])
                text = _fill(rng.choice(DECOY[task]), rng, entry.surface_text)
            else:
                text = _fill(rng.choice(SMALL_TALK[role]), rng)
        utterances.append(Utterance(i, role, text, FineLabelSet.from_codes(tasks)))
        decoys.append(decoy)

    gold_sorted = {t: tuple(lab for lab in label_map[t] if lab in gold[t]) for t in TASKS}
    return Conversation(conv_id, tuple(utterances), gold_sorted), decoys


def synth_generate(profile: GeneratorProfile, n_convs: int, seed: int,
                   dictionary: ConceptDictionary | None = None, return_decoys: bool = False):
    """``n_convs`` conversations from a single Rng seeded with ``seed``."""
    if dictionary is None:
        from .extract.dictionary import default_dictionary

        dictionary = default_dictionary()
    for t in TASKS:
        if not dictionary.by_task(t):
            raise ValueError(f"dictionary has no {t} entries to draw from")
    rng = Rng(seed)
    convs, flags = [], []
    width = max(4, len(str(n_convs)))
    for c in range(n_convs):
        conv, decoys = generate_conversation(f"conv{c:0{width}d}", profile, dictionary, rng)
        convs.append(conv)
        flags.append(decoys)
    if return_decoys:
        return convs, flags
    return convs
