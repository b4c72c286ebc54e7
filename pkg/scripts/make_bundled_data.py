"""Generate the bundled datasets under src/andorlens/data/.

table1.json: the teacher/colleague sample with its question-only variant and
nine logically equivalent rewrites (three per family), all annotating the
same ten question words.

demo_synthetic.json + demo_models.json: a small self-contained sample whose
scores come from planted surrogate models, for demos and pipeline tests.
"""

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from andorlens.dataset import load_dataset  # noqa: E402

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "andorlens", "data")


def question_text(name: str) -> str:
    return f"Emily is the colleague of {name}, Emily works as a"


def question_spans(question: str, offset: int, name: str):
    """Spans of the ten annotated question words, shifted by the premise length."""
    words = ["Emily", "is", "the", "colleague", "of", name, "Emily", "works", "as", "a"]
    spans = []
    cursor = 0
    for word in words:
        start = question.index(word, cursor)
        end = start + len(word)
        spans.append([offset + start, offset + end])
        cursor = end
    return spans


def variant(vid, vtype, premise, name="Caren"):
    question = question_text(name)
    if premise:
        text = f"{premise} {question}"
        offset = len(premise) + 1
    else:
        text = question
        offset = 0
    return {
        "variant_id": vid,
        "type": vtype,
        "text": text,
        "spans": question_spans(question, offset, name),
    }


def build_table1():
    variants = [
        variant("original", "original", "Caren works as a teacher."),
        variant("question_only", "question_only", ""),
        variant(
            "background_a", "background",
            "Caren works as a teacher and Tom works as a doctor.",
        ),
        variant(
            "background_b", "background",
            "Caren works as a teacher and she likes singing.",
        ),
        variant(
            "background_c", "background",
            "Caren works as a teacher and Bob works as a chef.",
        ),
        variant("paraphrase_a", "paraphrase", "Caren teaches students at school."),
        variant(
            "paraphrase_b", "paraphrase", "The school hired Caren as a teacher."
        ),
        variant(
            "paraphrase_c", "paraphrase",
            "Caren is employed at a school as a teacher.",
        ),
        variant(
            "renaming_a", "renaming", "Tina works at school as a teacher.", name="Tina"
        ),
        variant(
            "renaming_b", "renaming", "Anna works at school as a teacher.", name="Anna"
        ),
        variant(
            "renaming_c", "renaming", "Nora works at school as a teacher.", name="Nora"
        ),
    ]
    return {
        "samples": [
            {
                "sample_id": "teacher_colleague",
                "target": "teacher",
                "n": 10,
                "variants": variants,
            }
        ]
    }


def demo_question(name: str) -> str:
    return f"{name} plays the piano"


def demo_variant(vid, vtype, premise, name="Rosa"):
    question = demo_question(name)
    if premise:
        text = f"{premise} {question}"
        offset = len(premise) + 1
    else:
        text = question
        offset = 0
    words = [name, "plays", "the", "piano"]
    spans = []
    cursor = 0
    for word in words:
        start = question.index(word, cursor)
        spans.append([offset + start, offset + start + len(word)])
        cursor = start + len(word)
    return {"variant_id": vid, "type": vtype, "text": text, "spans": spans}


def build_demo_dataset():
    return {
        "samples": [
            {
                "sample_id": "demo",
                "target": "well",
                "n": 4,
                "variants": [
                    demo_variant("original", "original", "Rosa trained for years."),
                    demo_variant("question_only", "question_only", ""),
                    demo_variant(
                        "background_a", "background",
                        "Rosa trained for years and owns a cat.",
                    ),
                    demo_variant(
                        "paraphrase_a", "paraphrase", "Rosa practised for a long time."
                    ),
                    demo_variant(
                        "renaming_a", "renaming", "Mira trained for years.", name="Mira"
                    ),
                ],
            }
        ]
    }


def build_demo_models():
    """Planted surrogates: the premise enables two extra effects, the
    equivalent rewrites perturb one effect slightly (chaotic signal)."""
    base_and = {str(0b0011): 1.2, str(0b0110): -0.8}
    base_or = {str(0b1100): 0.9}
    with_premise_and = dict(base_and)
    with_premise_and[str(0b1010)] = 1.5   # reasoning-born pattern
    with_premise_or = dict(base_or)
    with_premise_or[str(0b0101)] = -0.6   # reasoning-born pattern

    def model(and_map, or_map, baseline, and_tweak=0.0):
        amap = dict(and_map)
        if and_tweak:
            amap[str(0b0011)] = amap[str(0b0011)] + and_tweak
        return {
            "n": 4,
            "baseline": baseline,
            "noise_sigma": 0.0,
            "seed": 0,
            "and": amap,
            "or": dict(or_map),
        }

    return {
        "variants": {
            "original": model(with_premise_and, with_premise_or, 0.5),
            "question_only": model(base_and, base_or, 0.5),
            "background_a": model(with_premise_and, with_premise_or, 0.5, and_tweak=0.15),
            "paraphrase_a": model(with_premise_and, with_premise_or, 0.5, and_tweak=-0.1),
            "renaming_a": model(with_premise_and, with_premise_or, 0.5, and_tweak=0.05),
        }
    }


def main():
    os.makedirs(DATA_DIR, exist_ok=True)
    for filename, doc in [
        ("table1.json", build_table1()),
        ("demo_synthetic.json", build_demo_dataset()),
        ("demo_models.json", build_demo_models()),
    ]:
        path = os.path.join(DATA_DIR, filename)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
        print("wrote", path)

    for name in ("table1.json", "demo_synthetic.json"):
        samples = load_dataset(os.path.join(DATA_DIR, name))
        print(name, "validates:", [s.sample_id for s in samples])


if __name__ == "__main__":
    main()
