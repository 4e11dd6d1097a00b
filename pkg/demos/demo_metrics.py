"""Average-precision evaluation on small hand-built detection scenarios.

Shows how the greedy matcher and the 101-point interpolated AP react to
perfect detections, localization error, score ranking mistakes, and false
positives.

Run with:  python3 demos/demo_metrics.py
"""

from rawisp.metrics import (AnnotationSet, Box, Detection, DetectionSet,
                            evaluate, iou)


def scenario(title, dets, gts):
    res = evaluate(dets, gts)
    print(f"{title:38s} AP={res['AP']:.3f}  AP50={res['AP50']:.3f}  "
          f"AP75={res['AP75']:.3f}")


def main():
    gt_boxes = [Box(10, 10, 50, 40, 0), Box(60, 20, 90, 70, 0)]
    gts = AnnotationSet()
    for b in gt_boxes:
        gts.add(0, b)

    dets = DetectionSet()
    for b in gt_boxes:
        dets.add(0, Detection(b, 0.9))
    scenario("perfect detections", dets, gts)

    dets = DetectionSet()
    shifted = Box(14, 13, 54, 43, 0)   # overlaps its target at IoU ~0.66
    print(f"  (shifted box IoU vs target: {iou(shifted, gt_boxes[0]):.3f})")
    dets.add(0, Detection(shifted, 0.9))
    dets.add(0, Detection(gt_boxes[1], 0.8))
    scenario("one box shifted", dets, gts)

    dets = DetectionSet()
    dets.add(0, Detection(Box(200, 200, 220, 220, 0), 0.95))  # confident miss
    for b in gt_boxes:
        dets.add(0, Detection(b, 0.5))
    scenario("confident false positive first", dets, gts)

    dets = DetectionSet()
    for b in gt_boxes:
        dets.add(0, Detection(b, 0.5))
    dets.add(0, Detection(Box(200, 200, 220, 220, 0), 0.05))  # timid miss
    scenario("false positive ranked last", dets, gts)


if __name__ == "__main__":
    main()
