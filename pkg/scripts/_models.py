"""Model instances shared by the experiment scripts."""
import numpy as np

from lossysched import CovMatrix, NetworkModel, PlantModel


def scalar_two_sensor_benchmark():
    """a=2 scalar plant; sensors with noise 1.0 (price 1.0) and 1.5 (price 0.5)."""
    plant = PlantModel(
        A=np.array([[2.0]]),
        B=np.array([[1.0]]),
        D=np.array([[1.0, 0.0]]),
        R=CovMatrix([[1.0]]),
        M=CovMatrix([[1.0]]),
        C=((np.array([[1.0]]),), (np.array([[1.0]]),)),
        F=((np.array([[0.0, 1.0]]),), (np.array([[0.0, 1.5]]),)),
    )
    net = NetworkModel(
        P=(np.ones((1, 1)), np.ones((1, 1))),
        loss=np.array([[0.10, 0.15]]),
        net_cost=np.array([[1.0, 0.5]]),
    )
    return plant, net


def scalar_single_sensor(a=2.0):
    """One unit sensor on an unstable scalar plant; loss rate swept externally."""
    plant = PlantModel(
        A=np.array([[float(a)]]),
        B=np.array([[1.0]]),
        D=np.array([[1.0, 0.0]]),
        R=CovMatrix([[1.0]]),
        M=CovMatrix([[1.0]]),
        C=((np.array([[1.0]]),),),
        F=((np.array([[0.0, 1.0]]),),),
    )
    net = NetworkModel(
        P=(np.ones((1, 1)),),
        loss=np.array([[0.0]]),
        net_cost=np.array([[0.0]]),
    )
    return plant, net


def diagonal_two_subsystem(a=2.0):
    """Two identical unstable subsystems, one dedicated unit sensor each."""
    d_mat = np.hstack([np.eye(2), np.zeros((2, 2))])
    plant = PlantModel(
        A=float(a) * np.eye(2),
        B=np.eye(2),
        D=d_mat,
        R=CovMatrix.identity(2),
        M=CovMatrix.identity(2),
        C=((np.array([[1.0, 0.0]]),), (np.array([[0.0, 1.0]]),)),
        F=(
            (np.array([[0.0, 0.0, 1.0, 0.0]]),),
            (np.array([[0.0, 0.0, 0.0, 1.0]]),),
        ),
    )
    net = NetworkModel(
        P=(np.ones((1, 1)), np.ones((1, 1))),
        loss=np.array([[0.0, 0.0]]),
        net_cost=np.array([[0.0, 0.0]]),
    )
    return plant, net
