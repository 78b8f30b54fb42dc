"""Writes fixtures/latin_300s.json, a synthetic 300 s pronunciation lecture."""
import json
import pathlib

LINES = [
    "Welcome back. Today we go through the Latin alphabet letter by letter.",
    "Most English letters came to us from Latin, with a few additions.",
    "Consonants are mostly pronounced as they are in English.",
    "C is always hard, as in cat, never soft as in cinch.",
    "G is also always hard, as in get, never as in gem.",
    "Q is always followed by U, and the pair sounds like kw.",
    "The letter I can be a vowel or a consonant.",
    "Before a vowel, or between vowels, I sounds like English Y.",
    "So iam sounds like yam, and maior like my-yor.",
    "S is always hissed, as in soot, never buzzed as in rose.",
    "T is always as in time, never the sh sound in nation.",
    "V was written for both the vowel U and the consonant W.",
    "Inscriptions carve every U as a V, so read them carefully.",
    "The consonantal V sounds like English W, as in wine.",
    "R is trilled, a little like Spanish or Italian.",
    "Double consonants are held slightly longer than single ones.",
    "Greek loan words bring the aspirates CH, PH and TH.",
    "CH is a k with a puff of air, as in character.",
    "PH is a p with breath, close to English p in pot.",
    "TH is a breathy t, as in top, not as in thin.",
    "Vowels come in long and short pairs.",
    "A long a sounds like father, a short a like the first a in aha.",
    "Long e sounds like they, short e like pet.",
    "Long o is like note, short o is like the o in often.",
    "Diphthongs AE and OE sound like eye and oy.",
    "AU sounds like the ow in how.",
    "Stress falls on the second to last syllable when it is long.",
    "Otherwise stress moves back to the third from last syllable.",
    "Let us read a short line aloud together.",
    "Gallia est omnis divisa in partes tres.",
    "Notice the hard G and the hissed S at the end.",
    "Try it again slowly, then at normal speed.",
    "Next time we will practise with a short passage of Cicero.",
    "Before then, read the alphabet chart twice out loud.",
    "That is all for today. Thank you for listening.",
]

CUTS = [0.0, 42.0, 96.0, 151.0, 203.0, 256.0]
CAPTIONS = [
    "Lecturer at a desk with a whiteboard titled Latin Alphabet",
    "Slide listing consonants C, G and Q with example words",
    "Slide showing I and V used as consonants, with an inscription photo",
    "Table of Greek aspirates CH, PH and TH with English comparisons",
    "Chart of long and short vowels and diphthongs",
    "Lecturer reading a Latin sentence written on the board",
]

DURATION = 300.0


def main():
    step = DURATION / len(LINES)
    transcript = []
    for i, text in enumerate(LINES):
        start = round(i * step + 0.3, 2)
        end = round((i + 1) * step - 0.4, 2)
        transcript.append({"start_s": start, "end_s": end, "text": text})
    scores = []
    for t in range(1, int(DURATION)):
        score = 40.0 if float(t) in CUTS[1:] else 2.0 + (t * 7 % 11) * 0.5
        scores.append({"t": float(t), "score": score})
    captions = []
    for t in range(0, int(DURATION), 10):
        scene = max(i for i, c in enumerate(CUTS) if c <= t)
        captions.append({"t": float(t), "caption": CAPTIONS[scene]})
    manifest = {
        "id": "latin-300",
        "title": "How to Pronounce Latin: The Alphabet",
        "abstract": "A walk through the Latin alphabet covering consonants, vowels, Greek aspirates and stress.",
        "course": "Introductory Latin",
        "duration_s": DURATION,
        "transcript": transcript,
        "frame_captions": captions,
        "frame_scores": scores,
    }
    out = pathlib.Path(__file__).resolve().parent.parent / "latin_300s.json"
    out.write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
