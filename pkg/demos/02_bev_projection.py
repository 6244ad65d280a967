# Where does "spatial matching" actually happen?  Not in the image: two
# objects 40 px apart can be 2 m or 20 m apart depending on depth.  The
# tracker compares detections in bird's-eye-view (BEV) coordinates, i.e. on
# the ground plane, after projecting image position + depth through the
# camera intrinsics.

from casctrack.geometry import CameraIntrinsics, project_bev, spatial_cost

cam = CameraIntrinsics(fx=500.0, fy=500.0, cx=512.0, cy=256.0,
                       width=1024, height=512)

# same pixel gap, very different depths
near_a = project_bev((492.0, 256.0), 8.0, cam)
near_b = project_bev((532.0, 256.0), 8.0, cam)
far_a = project_bev((492.0, 256.0), 40.0, cam)
far_b = project_bev((532.0, 256.0), 40.0, cam)

print("pixel gap 40 px at depth  8 m ->",
      f"{spatial_cost(near_a, near_b):.2f} m apart on the ground")
print("pixel gap 40 px at depth 40 m ->",
      f"{spatial_cost(far_a, far_b):.2f} m apart on the ground")

# The BEV point carries (lateral x, forward z).  Depth errors move points
# radially: a 10% depth error on a centered object shifts it almost purely
# along z.
truth = project_bev((512.0, 256.0), 20.0, cam)
off = project_bev((512.0, 256.0), 22.0, cam)
print(f"\ncentered object, +10% depth error: x moves "
      f"{abs(off.x_lateral - truth.x_lateral):.3f} m, "
      f"z moves {abs(off.z_forward - truth.z_forward):.3f} m")

# An off-center object leaks some of that error into x as well:
truth = project_bev((900.0, 256.0), 20.0, cam)
off = project_bev((900.0, 256.0), 22.0, cam)
print(f"off-center object, same error:     x moves "
      f"{abs(off.x_lateral - truth.x_lateral):.3f} m, "
      f"z moves {abs(off.z_forward - truth.z_forward):.3f} m")

# This is why the spatial gate is in meters, not pixels: 2.0 m means the
# same thing everywhere in the frame.
