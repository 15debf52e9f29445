import numpy as np
import pytest

from sweepdet import (AnnotatedScene, BoundingBox, ClassLabel, Taxonomy,
                      FALSE_DETECTION_ID, FALSE_DETECTION_NAME)

FD = ClassLabel(FALSE_DETECTION_ID, FALSE_DETECTION_NAME)
EXCAVATOR = ClassLabel(64, "Excavator")
GRADER = ClassLabel(66, "Ground Grader")
PLANE = ClassLabel(13, "Passenger/Cargo Plane")


@pytest.fixture
def small_taxonomy():
    return Taxonomy([FD, PLANE, EXCAVATOR, GRADER])


def solid_scene(image_id="scene", width=100, height=100, value=0, boxes=()):
    pixels = np.full((height, width, 3), value, dtype=np.uint8)
    return AnnotatedScene(image_id=image_id, pixels=pixels, boxes=list(boxes))


def paint_box(scene, box: BoundingBox, value):
    scene.pixels[box.y_min:box.y_max, box.x_min:box.x_max] = value


def make_geojson(features):
    import json
    return json.dumps({"type": "FeatureCollection", "features": features})


def feature(image_id, type_id, bounds, extra_properties=None, drop=()):
    props = {"image_id": image_id, "type_id": type_id,
             "bounds_imcoords": bounds}
    if extra_properties:
        props.update(extra_properties)
    for name in drop:
        props.pop(name, None)
    return {"type": "Feature", "properties": props,
            "geometry": {"type": "Point", "coordinates": [0, 0]}}
