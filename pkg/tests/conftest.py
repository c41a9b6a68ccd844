"""Shared fixtures: a curated annotated corpus sample and label data."""

import pytest

from skillclf.taxonomy import STANDARD_TAXONOMY, SkillLabel

# A hand-checked sample in the canonical on-disk form. It exercises
# multi-label sentences, unlabeled sentences, and several ads.
SAMPLE_CORPUS_TEXT = """\
1-2: 4; Knowledge of the English language at a professional level is required; T1.1, T1.3
1-3: 1; Task description; 0
1-3: 2; Support carrying out social scientific research on social and economic aspects of environmental issues; 0
1-3: 3; Contribute to preparation of scientific outputs such as reports conference papers and journal articles; 0
1-3: 4; Manage and coordinate research work in an international context; 0
1-3: 5; Support conducting a questionnaire survey in French and in English; 0
1-3: 6; Translate scientific documents from English into French; 0
1-3: 7; Required education and experience; 0
1-3: 8; PhD degree in social sciences and humanities; 0
1-3: 9; 5 years of experience in management of scientific research preferably on an environment-related topic; 0
1-3: 10; at least ten scientific outputs such as reports conference papers journal articles books and book chapters; 0
1-3: 11; Required skills; 0
1-3: 12; Ability to manage multiple projects at the same time and to deliver them on tight Schedule; T2.3, T3.1, T3.2, T4.4
1-3: 13; Capacity to write and edit scientific reports and publications; T2.4, T3.1, T3.4, T4.5, T6.4, T6.6
1-3: 14; good communication skills suitable for teamwork in an international collaborative environment; T4.1, T4.2, T4.3, T4.4
1-3: 15; Written and oral skills as a native French speaker (preferred) and written and oral skills in English for advanced scientific communication; T1.1
1-3: 16; a very good understanding of the Canadian political and cultural context; T6.4
1-4: 1; practice in the laboratory; 0
1-4: 2; knowledge of the English language; T1.1
1-4: 3; advanced knowledge of working with a PC; T1.3
"""

ALL_LABELS = [SkillLabel(x) for x in STANDARD_TAXONOMY.class_indices] + [
    SkillLabel(cls.class_index, y)
    for cls in STANDARD_TAXONOMY
    for y in range(1, cls.subclass_count + 1)
]


@pytest.fixture
def sample_corpus_text() -> str:
    return SAMPLE_CORPUS_TEXT
