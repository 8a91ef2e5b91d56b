#!/usr/bin/env python3
"""Regenerates tests/fixtures. Outputs are committed; rerun only on purpose.

The labels written next to each fixture come from how each response was
constructed (intended hit/miss, intended verdict), not from parsing it, so the
C++ tests compare against an independent source.
"""
import json
import random
from pathlib import Path

from PIL import Image, ImageDraw

ROOT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def dump_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


def pct(v):
    return f"{v:.1f}"


# ---------------------------------------------------------------- eval200

SIZES = [(1000, 500), (1920, 720), (1280, 720), (800, 480)]


def point_text(x, y, label):
    return f'<point x="{x}" y="{y}" alt="{label}">{label}</point>'


def centroid_pct(box, w, h):
    cx = (box[0] + box[2]) / 2 / w * 100
    cy = (box[1] + box[3]) / 2 / h * 100
    return round(cx, 1), round(cy, 1)


def far_point(box, w, h):
    # Opposite side of the image from the box centroid.
    cx = (box[0] + box[2]) / 2 / w
    cy = (box[1] + box[3]) / 2 / h
    return (5.0 if cx > 0.5 else 95.0), (5.0 if cy > 0.5 else 95.0)


def grounding_text(rng, intent, box, w, h, label):
    """Returns (text, hit) for a grounding intent."""
    if intent == "hit":
        x, y = centroid_pct(box, w, h)
        return point_text(pct(x), pct(y), label), True
    if intent == "miss":
        x, y = far_point(box, w, h)
        return point_text(pct(x), pct(y), label), False
    if intent == "none":
        return "I cannot find the element.", False
    if intent == "box_hit":
        q = [round(box[0] / w * 1000), round(box[1] / h * 1000), round(box[2] / w * 1000), round(box[3] / h * 1000)]
        return f"The element is at [[{q[0]}, {q[1]}, {q[2]}, {q[3]}]].", True
    if intent == "box_miss":
        x, y = far_point(box, w, h)
        bx, by = round(x * 10), round(y * 10)
        return f"[[{bx - 10},{by - 10},{bx + 10},{by + 10}]]", False
    if intent == "two_tags_last_hit":
        mx, my = far_point(box, w, h)
        x, y = centroid_pct(box, w, h)
        return point_text(pct(mx), pct(my), "draft") + "\nOn reflection:\n" + point_text(pct(x), pct(y), label), True
    if intent == "two_tags_last_miss":
        mx, my = far_point(box, w, h)
        x, y = centroid_pct(box, w, h)
        return point_text(pct(x), pct(y), label) + "\n" + point_text(pct(mx), pct(my), "other"), False
    if intent == "edge_x0":
        # Only used on 1000x500 images with x0 = 250 or 500: exact binary fractions.
        return point_text(pct(box[0] / 10), pct((box[1] + box[3]) / 2 / 5), label), True
    if intent == "edge_x1":
        return point_text(pct(box[2] / 10), pct((box[1] + box[3]) / 2 / 5), label), False
    if intent == "out_of_range":
        return point_text("150.0", "20.0", label), False
    if intent == "garbage":
        return '<point x="abc" y="1">' + label, False
    raise ValueError(intent)


def conclusion_text(rng, intent, gt):
    """Returns (text, parsed verdict or None)."""
    other = "FAILED" if gt == "PASSED" else "PASSED"
    if intent == "correct":
        return f"Conclusion: {gt}", gt
    if intent == "wrong":
        return f"Conclusion: {other}", other
    if intent == "lower":
        return f"conclusion: {gt.lower()}", gt
    if intent == "next_line":
        return f"CONCLUSION:\n{gt}", gt
    if intent == "token_only":
        return f"Overall the check {gt.lower()}.", gt
    if intent == "missing":
        return "The screen shows the element.", None
    raise ValueError(intent)


def make_eval200():
    rng = random.Random(20240611)
    images = []
    for i in range(40):
        w, h = SIZES[i % 4]
        images.append({"type": "image", "id": f"img-{i:03d}", "file_path": f"images/img-{i:03d}.png", "width": w,
                       "height": h, "language": "EN" if i % 3 != 0 else "DE", "source": ["brandA", "brandB", "brandC"][i % 3]})

    annotations, predictions, labels = [], [], []
    g_intents = ["hit"] * 8 + ["miss"] * 3 + ["none", "box_hit", "box_miss", "two_tags_last_hit", "two_tags_last_miss",
                                                "out_of_range", "garbage"]
    c_intents = ["correct"] * 6 + ["wrong"] * 2 + ["lower", "next_line", "token_only", "missing", "missing"]
    for k in range(200):
        img = images[k % 40]
        w, h = img["width"], img["height"]
        if w == 1000 and k % 7 == 0:
            x0 = 250 if k % 2 else 500
            box = [x0, 100, x0 + 100, 200]
        else:
            bw, bh = rng.randint(30, w // 4), rng.randint(30, h // 4)
            x0, y0 = rng.randint(0, w - bw), rng.randint(0, h - bh)
            box = [x0, y0, x0 + bw, y0 + bh]
        kind = "test_action" if k % 2 == 0 else "expected_result"
        ann = {"type": "annotation", "id": f"ann-{k:03d}", "image_id": img["id"], "kind": kind,
               "instruction": f"instruction {k}", "box": box}
        gt = None
        if kind == "expected_result":
            gt = "PASSED" if rng.random() < 0.7 else "FAILED"
            ann["expected_status"] = gt.lower()
        annotations.append(ann)

        if k % 41 == 40:  # no prediction at all
            labels.append({"annotation_id": ann["id"], "prediction_present": False, "grounding_hit": False,
                           "conclusion": None})
            continue

        if w == 1000 and k % 7 == 0:
            g_intent = "edge_x0" if k % 3 else "edge_x1"
        else:
            g_intent = rng.choice(g_intents)
        g_text, hit = grounding_text(rng, g_intent, box, w, h, ann["instruction"])
        verdict = None
        if kind == "expected_result":
            c_intent = rng.choice(c_intents)
            c_text, verdict = conclusion_text(rng, c_intent, gt)
            text = "The marked element is a button.\n" + c_text + "\n" + g_text
        else:
            text = "The marked element is a button.\n" + g_text
        predictions.append({"annotation_id": ann["id"], "raw_response": text})
        labels.append({"annotation_id": ann["id"], "prediction_present": True, "grounding_hit": hit,
                       "conclusion": verdict, "grounding_intent": g_intent})

    out = ROOT / "eval200"
    dump_jsonl(out / "manifest.jsonl", images + annotations)
    dump_jsonl(out / "predictions.jsonl", predictions)
    dump_jsonl(out / "labels.jsonl", labels)

    # Tally from the construction labels.
    by_id = {a["id"]: a for a in annotations}
    lang = {i["id"]: i["language"] for i in images}
    tally = {name: {"hits": 0, "n": 0} for name in
             ["ta_vg", "ta_vg_de", "ta_vg_en", "er_vg", "er_vg_de", "er_vg_en", "er_evl", "er_evl_de", "er_evl_en"]}
    confusion = {"passed": {"passed": 0, "failed": 0}, "failed": {"passed": 0, "failed": 0}}
    fallbacks = 0
    for lab in labels:
        a = by_id[lab["annotation_id"]]
        suffix = "_" + lang[a["image_id"]].lower()
        prefix = "ta" if a["kind"] == "test_action" else "er"
        for key in (prefix + "_vg", prefix + "_vg" + suffix):
            tally[key]["n"] += 1
            tally[key]["hits"] += int(lab["grounding_hit"])
        if prefix == "er":
            gt = a["expected_status"]
            pred = lab["conclusion"].lower() if lab["conclusion"] else ("failed" if gt == "passed" else "passed")
            if not lab["conclusion"]:
                fallbacks += 1
            confusion[gt][pred] += 1
            for key in ("er_evl", "er_evl" + suffix):
                tally[key]["n"] += 1
                tally[key]["hits"] += int(pred == gt)
    tally["confusion"] = confusion
    tally["fallbacks"] = fallbacks
    with open(out / "tally.json", "w") as f:
        json.dump(tally, f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------- pipeline30

def make_pipeline30():
    rng = random.Random(77)
    out = ROOT / "pipeline30"
    rows = []
    for i in range(6):
        w, h = (160, 90) if i % 2 == 0 else (128, 96)
        img = Image.new("RGB", (w, h), (30 + 20 * i, 40, 60))
        d = ImageDraw.Draw(img)
        for b in range(5):
            d.rectangle([8 + b * 28, 10 + (b % 2) * 30, 28 + b * 28, 30 + (b % 2) * 30], fill=(200, 200, 200 - 30 * b))
        path = out / "images" / f"screen-{i}.png"
        path.parent.mkdir(parents=True, exist_ok=True)
        img.save(path, optimize=False)
        rows.append({"type": "image", "id": f"screen-{i}", "file_path": f"images/screen-{i}.png", "width": w, "height": h,
                     "language": "DE" if i % 2 else "EN", "source": "fixture"})
    for k in range(30):
        i = k % 6
        w, h = (160, 90) if i % 2 == 0 else (128, 96)
        bw, bh = rng.randint(10, 40), rng.randint(8, 30)
        x0, y0 = rng.randint(0, w - bw), rng.randint(0, h - bh)
        rows.append({"type": "annotation", "id": f"box-{k:02d}", "image_id": f"screen-{i}", "kind": "test_action",
                     "instruction": f"element {k}", "box": [x0, y0, x0 + bw, y0 + bh]})
    dump_jsonl(out / "manifest.jsonl", rows)


# ---------------------------------------------------------------- screenspot6

CATEGORIES = ["Mobile-Text", "Mobile-Icon", "Desktop-Text", "Desktop-Icon", "Web-Text", "Web-Icon"]


def make_screenspot6():
    rng = random.Random(6)
    out = ROOT / "screenspot6"
    items, preds = [], []
    per_cat = {}
    sizes = [7, 5, 9, 4, 6, 11]
    hit_counts = [6, 2, 7, 1, 3, 8]
    for c, (cat, n, hits) in enumerate(zip(CATEGORIES, sizes, hit_counts)):
        for j in range(n):
            w, h = 1000, 500
            x0, y0 = rng.randint(0, 800), rng.randint(0, 400)
            box = [x0, y0, x0 + 100, y0 + 50]
            iid = f"{cat.lower()}-{j}"
            items.append({"id": iid, "category": cat, "width": w, "height": h, "box": box})
            if j < hits:
                x, y = centroid_pct(box, w, h)
            else:
                x, y = far_point(box, w, h)
            preds.append({"annotation_id": iid, "raw_response": point_text(pct(x), pct(y), "target")})
        per_cat[cat] = 100.0 * hits / n
    dump_jsonl(out / "manifest.jsonl", [{"type": "categories", "categories": CATEGORIES}] + items)
    dump_jsonl(out / "predictions.jsonl", preds)
    # Spreadsheet-style: one cell per category, then AVERAGE() over the six cells.
    macro = sum(per_cat.values()) / 6
    micro = 100.0 * sum(hit_counts) / sum(sizes)
    with open(out / "expected.json", "w") as f:
        json.dump({"per_category": per_cat, "macro_average": macro, "micro_average": micro,
                   "hits": dict(zip(CATEGORIES, hit_counts)), "n": dict(zip(CATEGORIES, sizes))}, f, indent=2)
        f.write("\n")


# ---------------------------------------------------------------- published baselines

def make_baselines():
    cols = ["ta_vg", "ta_vg_de", "ta_vg_en", "er_vg", "er_vg_de", "er_vg_en", "er_evl", "er_evl_de", "er_evl_en"]
    rows = [
        ("InternVL2.5-8B", [26.6, 26.1, 27.0, 5.7, 6.3, 5.1, 64.8, 60.4, 69.0]),
        ("TinyClick", [61.0, 54.6, 67.8, 53.3, 47.3, 59.2, None, None, None]),
        ("UGround-V1-7B (Qwen2-VL)", [69.4, 68.9, 69.9, 55.0, 54.4, 55.7, None, None, None]),
        ("Molmo-7B-D-0924", [71.3, 70.9, 71.8, 71.4, 69.8, 72.9, 66.9, 67.8, 66.0]),
        ("LAM-270M (TinyClick)", [73.9, 66.9, 81.1, 59.9, 54.6, 65.1, None, None, None]),
        ("ELAM-7B (Molmo)", [87.6, 87.5, 87.6, 77.5, 77.0, 77.9, 78.2, 78.5, 77.8]),
        ("Human Domain Expert", [94.5, 94.5, 94.5, 86.4, 87.3, 85.5, 93.2, 93.7, 92.8]),
    ]
    doc = {"source": "published", "table": "baseline results",
           "rows": [{"model": m, **dict(zip(cols, v))} for m, v in rows]}
    with open(ROOT / "published_baselines.json", "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    make_eval200()
    make_pipeline30()
    make_screenspot6()
    make_baselines()
