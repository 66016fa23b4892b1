"""Built-in model fixtures: a desk-scale biped and small test chains.

The desk biped is a floating-base robot with two 3-joint legs
(hip roll, hip pitch, ankle pitch) and a 2-joint torso, eight actuated
joints in total and roughly 24 kg of mass.  It is small enough for fast
closed-loop tests while still exercising floating-base estimation with
two feet, force/torque sensors and a waist IMU.
"""

import numpy as np

from .model import parse_model
from .spatial import Transform

# foot sole geometry: corner offsets in the sole frame (m)
FOOT_CORNERS = np.array([
    [0.10, 0.05, 0.0],
    [0.10, -0.05, 0.0],
    [-0.06, 0.05, 0.0],
    [-0.06, -0.05, 0.0],
])

# sole frame sits this far below the ankle joint
SOLE_DROP = 0.05
# vertical distance pelvis origin -> sole at zero joint angles
STANDING_HEIGHT = 0.50


def _leg(side, sign):
    return f"""
  <link name="{side}_hip">
    <inertial><mass value="0.8"/><inertia ixx="0.002" iyy="0.002" izz="0.002"/></inertial>
  </link>
  <joint name="{side}_hip_roll" type="revolute">
    <parent link="pelvis"/><child link="{side}_hip"/>
    <origin xyz="0 {sign * 0.10} -0.05"/><axis xyz="1 0 0"/>
  </joint>
  <link name="{side}_shank">
    <inertial><origin xyz="0 0 -0.2"/><mass value="2.4"/>
      <inertia ixx="0.035" iyy="0.035" izz="0.003"/></inertial>
  </link>
  <joint name="{side}_hip_pitch" type="revolute">
    <parent link="{side}_hip"/><child link="{side}_shank"/>
    <origin xyz="0 0 0"/><axis xyz="0 1 0"/>
  </joint>
  <link name="{side}_foot">
    <inertial><origin xyz="0.02 0 -0.03"/><mass value="1.0"/>
      <inertia ixx="0.008" iyy="0.010" izz="0.012"/></inertial>
  </link>
  <joint name="{side}_ankle_pitch" type="revolute">
    <parent link="{side}_shank"/><child link="{side}_foot"/>
    <origin xyz="0 0 -0.4"/><axis xyz="0 1 0"/>
  </joint>
"""


def desk_biped_urdf():
    """URDF text of the desk-scale biped."""
    return f"""
<robot name="desk_biped">
  <link name="pelvis">
    <inertial><mass value="8"/><inertia ixx="0.08" iyy="0.06" izz="0.05"/></inertial>
  </link>
  <joint name="root" type="floating"><parent link="world"/><child link="pelvis"/></joint>
  <link name="torso_lower">
    <inertial><mass value="2"/><inertia ixx="0.01" iyy="0.01" izz="0.01"/></inertial>
  </link>
  <joint name="torso_pitch" type="revolute">
    <parent link="pelvis"/><child link="torso_lower"/>
    <origin xyz="0 0 0.10"/><axis xyz="0 1 0"/>
  </joint>
  <link name="torso">
    <inertial><origin xyz="0 0 0.15"/><mass value="6"/>
      <inertia ixx="0.06" iyy="0.05" izz="0.03"/></inertial>
  </link>
  <joint name="torso_roll" type="revolute">
    <parent link="torso_lower"/><child link="torso"/>
    <origin xyz="0 0 0.05"/><axis xyz="1 0 0"/>
  </joint>
{_leg("left", 1)}
{_leg("right", -1)}
</robot>
"""


def desk_biped():
    """Desk-scale biped with sole, FT and IMU frames attached."""
    model = parse_model(desk_biped_urdf())
    for side in ("left", "right"):
        sole = Transform(p=np.array([0.02, 0.0, -SOLE_DROP]))
        model.add_frame(f"{side}_sole", f"{side}_foot", sole)
        model.add_frame(f"{side}_foot_ft", f"{side}_foot", sole)
    model.add_frame("waist_imu", "pelvis", Transform(p=np.array([0.0, 0.0, 0.05])))
    model.add_frame("torso_push", "torso", Transform(p=np.array([0.0, 0.0, 0.15])))
    return model


def pendulum_urdf(mass=1.0, length=1.0, axis="0 -1 0"):
    """Floating base with a single revolute arm; COM `length` along +x.

    With axis -y and the arm horizontal, the static holding torque is
    +mass*9.81*length.
    """
    return f"""
<robot name="pendulum">
  <link name="base">
    <inertial><mass value="5"/><inertia ixx="0.1" iyy="0.1" izz="0.1"/></inertial>
  </link>
  <joint name="root" type="floating"><parent link="world"/><child link="base"/></joint>
  <link name="arm">
    <inertial><origin xyz="{length} 0 0"/><mass value="{mass}"/>
      <inertia ixx="1e-6" iyy="1e-6" izz="1e-6"/></inertial>
  </link>
  <joint name="shoulder" type="revolute">
    <parent link="base"/><child link="arm"/><axis xyz="{axis}"/>
  </joint>
</robot>
"""


def two_link_arm_urdf(m1=1.2, m2=0.7, l1=0.6, l2=0.4):
    """Planar 2-link arm (both joints about -y) hanging from the base.

    Link COMs sit at the link midpoints; rotational inertias are those
    of slender rods so the Lagrangian oracle stays simple.
    """
    i1 = m1 * l1 * l1 / 12.0
    i2 = m2 * l2 * l2 / 12.0
    return f"""
<robot name="two_link">
  <link name="base">
    <inertial><mass value="10"/><inertia ixx="0.2" iyy="0.2" izz="0.2"/></inertial>
  </link>
  <joint name="root" type="floating"><parent link="world"/><child link="base"/></joint>
  <link name="upper">
    <inertial><origin xyz="{l1 / 2} 0 0"/><mass value="{m1}"/>
      <inertia ixx="1e-9" iyy="{i1}" izz="{i1}"/></inertial>
  </link>
  <joint name="q1" type="revolute">
    <parent link="base"/><child link="upper"/><axis xyz="0 -1 0"/>
  </joint>
  <link name="lower">
    <inertial><origin xyz="{l2 / 2} 0 0"/><mass value="{m2}"/>
      <inertia ixx="1e-9" iyy="{i2}" izz="{i2}"/></inertial>
  </link>
  <joint name="q2" type="revolute">
    <parent link="upper"/><child link="lower"/>
    <origin xyz="{l1} 0 0"/><axis xyz="0 -1 0"/>
  </joint>
</robot>
"""


def serial_leg_urdf():
    """3-link serial chain used by the parser/tree-traversal tests."""
    return """
<robot name="leg3">
  <link name="base">
    <inertial><mass value="3"/><inertia ixx="0.02" iyy="0.02" izz="0.02"/></inertial>
  </link>
  <joint name="root" type="floating"><parent link="world"/><child link="base"/></joint>
  <link name="thigh">
    <inertial><origin xyz="0 0 -0.2"/><mass value="1.5"/>
      <inertia ixx="0.01" iyy="0.01" izz="0.002"/></inertial>
  </link>
  <joint name="hip" type="revolute">
    <parent link="base"/><child link="thigh"/>
    <origin xyz="0 0.1 0"/><axis xyz="0 1 0"/>
  </joint>
  <link name="shin">
    <inertial><origin xyz="0 0 -0.15"/><mass value="1.0"/>
      <inertia ixx="0.008" iyy="0.008" izz="0.001"/></inertial>
  </link>
  <joint name="knee" type="revolute">
    <parent link="thigh"/><child link="shin"/>
    <origin xyz="0 0 -0.4"/><axis xyz="0 1 0"/>
  </joint>
  <link name="foot">
    <inertial><origin xyz="0.05 0 0"/><mass value="0.5"/>
      <inertia ixx="0.001" iyy="0.001" izz="0.001"/></inertial>
  </link>
  <joint name="ankle" type="revolute">
    <parent link="shin"/><child link="foot"/>
    <origin xyz="0 0 -0.3"/><axis xyz="0 1 0"/>
  </joint>
</robot>
"""
