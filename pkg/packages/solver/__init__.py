"""谱配置求解器：径向网格、特殊函数、线性/非线性求解与估计验证。"""
